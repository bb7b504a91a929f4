"""Prediction smoothing: mixing a categorical predictor with the uniform
distribution to cap the worst-case negative log likelihood."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

__all__ = ["SmoothingSpec", "optimal_alpha", "smooth_nll", "smoothing_guarantee"]

# exp(-746) underflows float64; probabilities below this floor are treated
# as exactly 0, where the smoothed loss saturates at the worst case.
_UNDERFLOW_NLL = 745.0


@dataclass(frozen=True)
class SmoothingSpec:
    """Mixing weight alpha over vocabulary of size vocab.

    worst_case_nats = ln(vocab / alpha) caps the smoothed NLL.
    """

    alpha: float
    vocab: int
    worst_case_nats: float

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.vocab < 2:
            raise ValueError("vocab must be >= 2")
        expected = math.log(self.vocab / self.alpha)
        if not math.isclose(self.worst_case_nats, expected, rel_tol=1e-12):
            raise ValueError("worst_case_nats inconsistent with ln(vocab/alpha)")

    @classmethod
    def from_alpha(cls, alpha: float, vocab: int) -> "SmoothingSpec":
        return cls(alpha=alpha, vocab=vocab, worst_case_nats=math.log(vocab / alpha))


def optimal_alpha(complexity_c: float, vocab: int) -> SmoothingSpec:
    """Closed-form optimal mixing weight alpha = V*C / ((V-1)*(1+C)).

    For large V this is approximately C/(1+C). Errors out when the formula
    leaves (0, 1), i.e. the complexity is too large for this vocabulary.
    """
    if complexity_c <= 0.0:
        raise ValueError("complexity_c must be positive")
    if vocab < 2:
        raise ValueError("vocab must be >= 2")
    alpha = vocab * complexity_c / ((vocab - 1) * (1.0 + complexity_c))
    if alpha >= 1.0:
        raise ValueError(
            f"optimal alpha = {alpha:.6g} >= 1: complexity {complexity_c} "
            f"too large for vocabulary {vocab}"
        )
    return SmoothingSpec.from_alpha(alpha, vocab)


def smooth_nll(nll, spec: SmoothingSpec):
    """NLL under the mixture (1-alpha)*p + alpha/V, from the raw NLL.

    Accepts scalars or arrays. Monotone increasing in nll and capped at
    spec.worst_case_nats.
    """
    nll_arr = np.asarray(nll, dtype=float)
    if np.any(nll_arr < 0.0):
        raise ValueError("nll values must be nonnegative")
    floor = spec.alpha / spec.vocab
    p = np.where(nll_arr > _UNDERFLOW_NLL, 0.0, np.exp(-np.minimum(nll_arr, _UNDERFLOW_NLL)))
    out = -np.log((1.0 - spec.alpha) * p + floor)
    if np.isscalar(nll) or nll_arr.ndim == 0:
        return float(out)
    return out


def smoothing_guarantee(empirical_risk: float, complexity_c: float, vocab: int) -> float:
    """Right-hand side of the smoothing inequality:
    ``empirical_risk + C*ln(V) + sqrt(2C)``.

    With alpha = optimal_alpha(C, V), the smoothed risk plus C times the
    worst case never exceeds this value, for any loss multiset.
    """
    if complexity_c <= 0.0:
        raise ValueError("complexity_c must be positive")
    return empirical_risk + complexity_c * math.log(vocab) + math.sqrt(2.0 * complexity_c)
