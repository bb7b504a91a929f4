"""From loss curves to compute allocation to certificate complexity.

Fits the saturating power law to synthetic frontier losses, solves the
compute-optimal parameter/token split, and shows how the prequential
view turns a training curve into a description length — including the
model size where prequential coding overtakes naive parameter counting.
"""

import numpy as np

import tokenbound as tb


def main():
    # Recover a planted scaling law from noisy frontier losses.
    rng = np.random.default_rng(7)
    n = np.geomspace(1e7, 1e10, 10)
    loss = 1.69 + 8337.0 * n ** (-0.54)
    fit = tb.fit_power_law(list(zip(n, loss * (1 + 0.002 * rng.standard_normal(10)))))
    print(f"fitted law: {fit.offset:.3f} + {fit.coefficient:.0f} * N^-{fit.exponent:.3f}")

    # Compute-optimal split for the reference parametric risk.
    for compute in (1e19, 1e21, 1e23):
        alloc = tb.optimal_allocation(tb.REFERENCE_PARAMS, compute)
        print(f"  C = {compute:.0e}: N* = {alloc.n_star:.3e}, "
              f"D* = {alloc.d_star:.3e}, tokens/param = {alloc.d_star / alloc.n_star:.1f}")

    # Prequential description length of training itself.
    coef_b, beta = 410.7, 0.37
    d = 10**9
    kh = tb.exact_excess_sum(coef_b, beta, d)
    asym = coef_b * beta / (1.0 - beta) * d ** (1.0 - beta)
    print(f"\nprequential excess at D = {d:.0e}: exact {kh:.4e} nats "
          f"(asymptotic form {asym:.4e})")
    comp = tb.prequential_complexity(kh, d, grid_size=1000, delta_fail=0.01)
    print(f"per-token complexity: {comp:.4f} nats")

    cross = tb.crossover_point(coefficient_bits=6e5 / np.log(2.0),
                               exponent=0.54, bits_per_param=4.0)
    print(f"prequential coding overtakes {4.0:.0f}-bit parameter counting "
          f"beyond N = {cross.n_cross:.2e} parameters")


if __name__ == "__main__":
    main()
