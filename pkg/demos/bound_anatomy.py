"""Anatomy of the token-level generalization bound.

Builds the five-term certificate for a 50k-vocabulary model at a
chinchilla-style token budget and walks through where each nat comes
from: the empirical risk, the random-guess floor bought by smoothing,
the grid-minimized loss-variation term, the smoothing overhead, and the
full-to-quantized gap.
"""

import math

import numpy as np

import tokenbound as tb

VOCAB = 50_000
COMPLEXITY = 1.0 / 9.0  # per-token description length, nats

def main():
    alpha = tb.optimal_alpha(COMPLEXITY, VOCAB)
    print(f"smoothing weight alpha = {alpha.alpha:.6f} "
          f"(caps every smoothed NLL at {alpha.worst_case_nats:.3f} nats)")

    rng = np.random.default_rng(0)
    nll_full = rng.gamma(4.0, 0.5, size=200)  # plausible per-token losses
    trace = tb.TokenTrace(
        vocab=VOCAB,
        alpha_used=alpha.alpha,
        nll_full=nll_full,
        nll_quant=np.minimum(nll_full + 0.1, alpha.worst_case_nats),
        proxy_mean_quant=nll_full + rng.uniform(0.0, 0.3, size=200),
    )
    cfg = tb.BoundConfig(
        num_params=10**6,
        num_tokens=2 * 10**7,
        vocab=VOCAB,
        complexity_override=COMPLEXITY,
        sigma_override=0.1,
        quant_gap_override=0.1,
    )
    rep = tb.assemble_bound(trace, cfg)

    print(f"\nempirical risk (full model)   {rep.empirical_risk_full:8.4f}")
    print(f"+ random-guess term C*ln(V)   {rep.term_random_guess:8.4f}")
    print(f"+ loss variation  Sigma*sqrt(C) {rep.term_loss_variation:6.4f}")
    print(f"+ smoothing overhead sqrt(2C) {rep.term_smoothing:8.4f}")
    print(f"+ quantization gap            {rep.term_quant_gap:8.4f}")
    print(f"= total bound                 {rep.total_bound:8.4f}")
    gap = rep.total_bound - rep.empirical_risk_full
    print(f"\ncertificate cost over the empirical risk: {gap:.3f} nats/token")
    print(f"random-guessing baseline ln(V) = {math.log(VOCAB):.3f} nats")
    print("vacuous" if rep.vacuous else "non-vacuous: the model provably "
          "beats random guessing on fresh tokens")


if __name__ == "__main__":
    main()
