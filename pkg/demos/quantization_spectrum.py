"""Spectral tools behind the quantization term of the bound.

Estimates Tr(sqrt(H)) of a synthetic loss Hessian by stochastic Lanczos
quadrature, compares Hutchinson probe choices, runs the LDL-driven
sequential quantizer against its incoherence bound, and converts a
quadratic error budget into bits per parameter.
"""

import numpy as np

import tokenbound as tb


def make_hessian(n=200, seed=0, cond=100.0):
    rng = np.random.default_rng(seed)
    evals = np.geomspace(1.0 / cond, 1.0, n)
    q = np.linalg.qr(rng.standard_normal((n, n)))[0]
    h = (q * evals) @ q.T
    return (h + h.T) / 2.0


def main():
    h = make_hessian()
    truth = float(np.sum(np.sqrt(np.linalg.eigvalsh(h))))

    m, n_v = tb.slq_param_sizing(kappa=100.0, lambda_max=1.0, lambda_min=0.01,
                                 eps=0.05, eta=0.1)
    print(f"sizing for 5% relative error at 90% confidence: "
          f"{m} Lanczos steps, {n_v} probes")
    est = tb.slq_trace_sqrt(tb.SymmetricOperator.from_dense(h), m, 2000, seed=0)
    print(f"Tr(sqrt(H)) = {truth:.4f}, SLQ estimate {est.trace_sqrt:.4f} "
          f"with 2000 probes ({abs(est.trace_sqrt - truth) / truth:.2%} error)")

    op = tb.SymmetricOperator.from_dense(h)
    for kind in ("rademacher", "gaussian"):
        tr, var = tb.hutchinson_trace(op, 1000, kind, seed=1)
        print(f"  Hutchinson trace ({kind:10s}): {tr:8.3f} "
              f"(per-probe variance {var:.3f})")

    # Quantize a weight vector against this Hessian.
    rng = np.random.default_rng(3)
    w = rng.uniform(-1.0, 1.0, h.shape[0])
    inc = tb.incoherence_transform(h, seed=3, weights=w, orthogonal=True)
    res = tb.ldlq_quantize(inc.weights, inc.operator.dense,
                           quantizer="stochastic", grid_step=2.0 ** -4, seed=0)
    print(f"\nsequential quantizer at 1/16 grid step: quadratic error "
          f"{res.quad_error:.5f} vs incoherence bound {res.bound_value:.5f} "
          f"(mu = {res.incoherence_mu:.2f})")

    bits = tb.required_bits(trace_sqrt=truth, num_params=h.shape[0],
                            quant_budget=0.01, delta_fail=0.05)
    print(f"bits per parameter for a 0.01-nat quadratic budget: {bits:.2f}")


if __name__ == "__main__":
    main()
