"""Information-transfer accounting via prequential coding.

Upper-bounds the model information content from online vs final loss
curves, gives its closed-form asymptotic under the two-term power-law
loss model, locates the crossover against parameter counting, and turns
the estimate into a per-token complexity for the assembled bound.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import mpmath
import numpy as np

from .coding import LN2, prefix_code_length
from .scaling import ChinchillaParams

__all__ = [
    "OnlineLossCurve",
    "InfoEstimate",
    "CrossoverResult",
    "prequential_kh",
    "asymptotic_kh",
    "exact_excess_sum",
    "crossover_point",
    "prequential_complexity",
]


@dataclass(frozen=True)
class OnlineLossCurve:
    """Per-item online losses (model before seeing the item) and final-model
    losses, both in nats."""

    per_step_online_loss: np.ndarray
    final_model_losses: np.ndarray

    def __post_init__(self):
        online = np.asarray(self.per_step_online_loss, dtype=float)
        final = np.asarray(self.final_model_losses, dtype=float)
        if len(online) != len(final):
            raise ValueError(f"length mismatch: {len(online)} vs {len(final)}")
        if len(online) < 1:
            raise ValueError("curves must be non-empty")
        if not (np.all(np.isfinite(online)) and np.all(np.isfinite(final))):
            raise ValueError("losses must be finite")
        if np.any(online < 0.0) or np.any(final < 0.0):
            raise ValueError("losses must be nonnegative")
        object.__setattr__(self, "per_step_online_loss", online)
        object.__setattr__(self, "final_model_losses", final)

    @property
    def n(self) -> int:
        return len(self.per_step_online_loss)


class InfoEstimate(NamedTuple):
    kh_nats: float
    kh_bits: float
    kh_bits_clamped: float


def prequential_kh(curve: OnlineLossCurve) -> InfoEstimate:
    """Information content upper bound: sum of (online - final) losses.

    Negative partial terms are allowed (the final model can be worse on
    early items); the raw total is reported alongside a zero-clamped view.
    """
    kh_nats = float(
        math.fsum(curve.per_step_online_loss) - math.fsum(curve.final_model_losses)
    )
    kh_bits = kh_nats / LN2
    return InfoEstimate(kh_nats, kh_bits, max(kh_bits, 0.0))


def exact_excess_sum(coef_b: float, beta: float, num_tokens: int) -> float:
    """Exact value of sum_{k=1}^{D} B*k^(-beta) - D * B*D^(-beta).

    Evaluated through the Hurwitz zeta continuation, which matches direct
    compensated summation and stays exact at D ~ 1e9 and beyond.
    """
    if not 0.0 < beta < 1.0:
        raise ValueError("beta must lie in (0, 1)")
    if num_tokens < 1:
        raise ValueError("num_tokens must be >= 1")
    partial = mpmath.zeta(beta) - mpmath.zeta(beta, num_tokens + 1)
    return float(coef_b * (partial - num_tokens ** (1.0 - beta)))


def asymptotic_kh(
    params: ChinchillaParams, num_params: int, num_tokens: int, paper_literal: bool = False
) -> float:
    """Closed-form asymptotic of the prequential excess:
    B * (beta/(1-beta)) * D^(1-beta) nats.

    The data-term coefficient B multiplies the asymptotic; it follows from
    integrating B*k^(-beta), and the exact finite sum only matches with it
    present. paper_literal=True drops it.
    """
    beta = params.exp_beta
    if beta >= 1.0:
        raise ValueError("beta must be < 1 for sublinear information growth")
    if num_tokens < 1:
        raise ValueError("num_tokens must be >= 1")
    coef = 1.0 if paper_literal else params.coef_b
    return coef * (beta / (1.0 - beta)) * num_tokens ** (1.0 - beta)


class CrossoverResult(NamedTuple):
    n_cross: Optional[float]
    has_crossover: bool


def crossover_point(coefficient_bits: float, exponent: float, bits_per_param: float) -> CrossoverResult:
    """Model size where the prequential code length k*N^p (bits) overtakes
    parameter counting b*N: N = (k/b)^(1/(1-p)).

    Below the crossover parameter counting is the tighter code length;
    above it the prequential estimate wins. p >= 1 means the curves never
    cross (reported, not an error).
    """
    if coefficient_bits <= 0.0 or bits_per_param <= 0.0:
        raise ValueError("coefficient and bits_per_param must be positive")
    if exponent < 0.0:
        raise ValueError("exponent must be nonnegative")
    if exponent >= 1.0:
        return CrossoverResult(None, False)
    return CrossoverResult(
        (coefficient_bits / bits_per_param) ** (1.0 / (1.0 - exponent)), True
    )


def prequential_complexity(
    kh_nats: float,
    num_tokens: int,
    grid_size: int,
    delta_fail: float,
    prefix_free: bool = False,
) -> float:
    """Per-token complexity from a prequential information estimate:
    (K(h) + ln(grid_size/delta_fail)) / D.

    Vocabulary size and token count are treated as prespecified, so no
    prefix surcharge is added by default; prefix_free=True adds the
    self-delimiting overhead on the bit length.
    """
    if num_tokens < 1:
        raise ValueError("num_tokens must be >= 1")
    if grid_size < 1:
        raise ValueError("grid_size must be >= 1")
    if not 0.0 < delta_fail < 1.0:
        raise ValueError("delta_fail must lie in (0, 1)")
    if kh_nats < 0.0:
        raise ValueError("kh_nats must be nonnegative; clamp upstream if needed")
    code_nats = kh_nats
    if prefix_free and kh_nats > 0.0:
        code_nats = prefix_code_length(max(kh_nats / LN2, 1.0)).nats
    return (code_nats + math.log(grid_size / delta_fail)) / num_tokens
