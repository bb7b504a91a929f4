"""Scaling-law evaluation: the two-term power-law loss model, compute-
optimal allocation, frontier checkpoint selection with interpolation, and
offset power-law fitting."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

__all__ = [
    "ChinchillaParams",
    "CheckpointCurve",
    "PowerLawFit",
    "AllocationResult",
    "FrontierSelection",
    "REFERENCE_PARAMS",
    "chinchilla_risk",
    "optimal_allocation",
    "select_frontier",
    "fit_power_law",
]

COMPUTE_PER_PARAM_TOKEN = 6.0


@dataclass(frozen=True)
class ChinchillaParams:
    """Loss model E + A/N^alpha + B/D^beta."""

    irreducible: float
    coef_a: float
    coef_b: float
    exp_alpha: float
    exp_beta: float

    def __post_init__(self):
        if self.irreducible < 0.0:
            raise ValueError("irreducible error must be >= 0")
        if min(self.coef_a, self.coef_b, self.exp_alpha, self.exp_beta) <= 0.0:
            raise ValueError("coefficients and exponents must be positive")


# Reference constants: parameter/token ratio 1/20 on the compute-optimal
# frontier and a token exponent of 0.37. Shipped as a preset, not baked
# into any formula.
REFERENCE_PARAMS = ChinchillaParams(
    irreducible=1.69,
    coef_a=406.4,
    coef_b=410.7,
    exp_alpha=0.34,
    exp_beta=0.37,
)


@dataclass(frozen=True)
class CheckpointCurve:
    """Training-loss curve for one model size, sorted by tokens seen."""

    model_size: int
    tokens_seen: np.ndarray
    train_loss: np.ndarray
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        d = np.asarray(self.tokens_seen, dtype=float)
        loss = np.asarray(self.train_loss, dtype=float)
        if len(d) != len(loss) or len(d) < 1:
            raise ValueError("tokens_seen and train_loss must be equal-length, non-empty")
        if np.any(d < 1):
            raise ValueError("tokens_seen must be >= 1")
        if np.any(np.diff(d) <= 0):
            raise ValueError("checkpoints must be strictly increasing in tokens seen")
        object.__setattr__(self, "tokens_seen", d)
        object.__setattr__(self, "train_loss", loss)
        for key, col in dict(self.extras).items():
            arr = np.asarray(col, dtype=float)
            if len(arr) != len(d):
                raise ValueError(f"extra column {key!r} has mismatched length")
            self.extras[key] = arr


@dataclass(frozen=True)
class PowerLawFit:
    """Fitted y = offset + coefficient * x^(-exponent)."""

    offset: float
    coefficient: float
    exponent: float
    rms_residual: float
    stderr_exponent: float
    degenerate: bool = False

    def __call__(self, x):
        return self.offset + self.coefficient * np.asarray(x, dtype=float) ** (-self.exponent)


class AllocationResult(NamedTuple):
    n_star: float
    d_star: float
    g: float
    exp_a: float
    exp_b: float


def chinchilla_risk(params: ChinchillaParams, num_params: float, num_tokens: float) -> float:
    """Loss model value at (N, D); strictly decreasing in both arguments."""
    if num_params < 1 or num_tokens < 1:
        raise ValueError("N and D must be >= 1")
    return (
        params.irreducible
        + params.coef_a / num_params ** params.exp_alpha
        + params.coef_b / num_tokens ** params.exp_beta
    )


def optimal_allocation(
    params: ChinchillaParams, compute: float, compute_constant: float = COMPUTE_PER_PARAM_TOKEN
) -> AllocationResult:
    """Compute-optimal (N*, D*) under the budget C = compute_constant * N * D.

    N* = G (C/6)^a, D* = G^{-1} (C/6)^b with
    G = (alpha*A / (beta*B))^(1/(alpha+beta)), a = beta/(alpha+beta),
    b = alpha/(alpha+beta). The product N* D* = C/6 is an identity.
    """
    if compute <= 0.0:
        raise ValueError("compute budget must be positive")
    al, be = params.exp_alpha, params.exp_beta
    g = (al * params.coef_a / (be * params.coef_b)) ** (1.0 / (al + be))
    exp_a = be / (al + be)
    exp_b = al / (al + be)
    base = compute / compute_constant
    return AllocationResult(g * base**exp_a, base**exp_b / g, g, exp_a, exp_b)


@dataclass(frozen=True)
class FrontierSelection:
    """One frontier point per model size, exact or interpolated in N/D."""

    model_size: int
    tokens_seen: float
    ratio: float
    target_ratio: float
    interpolated: bool
    distance: float
    quantities: dict


def _interp_in_ratio(r_lo, r_hi, target, v_lo, v_hi):
    w = (target - r_lo) / (r_hi - r_lo)
    return v_lo + w * (v_hi - v_lo)


def select_frontier(
    curves: Sequence[CheckpointCurve], target_ratio: float
) -> list[FrontierSelection]:
    """Pick, per model size, the checkpoint whose parameter/token ratio is
    closest to the target; interpolate attached quantities linearly in the
    ratio when two checkpoints bracket it."""
    if not curves:
        raise ValueError("no checkpoint curves given")
    if target_ratio <= 0.0:
        raise ValueError("target_ratio must be positive")
    out = []
    for curve in curves:
        ratios = curve.model_size / curve.tokens_seen  # decreasing in D
        columns = {"tokens_seen": curve.tokens_seen, "loss": curve.train_loss}
        columns.update(curve.extras)
        # Bracketing pair in ratio space (ratios are sorted descending).
        below = np.nonzero(ratios <= target_ratio)[0]
        above = np.nonzero(ratios >= target_ratio)[0]
        exact = np.nonzero(np.isclose(ratios, target_ratio, rtol=1e-12))[0]
        if len(exact) or not (len(below) and len(above)) or len(curve.tokens_seen) == 1:
            idx = int(np.argmin(np.abs(ratios - target_ratio)))
            out.append(
                FrontierSelection(
                    model_size=curve.model_size,
                    tokens_seen=float(curve.tokens_seen[idx]),
                    ratio=float(ratios[idx]),
                    target_ratio=target_ratio,
                    interpolated=False,
                    distance=float(abs(ratios[idx] - target_ratio)),
                    quantities={k: float(v[idx]) for k, v in columns.items()},
                )
            )
            continue
        hi_idx = int(above[-1])   # smallest ratio still above target
        lo_idx = int(below[0])    # largest ratio at or below target
        r_lo, r_hi = float(ratios[lo_idx]), float(ratios[hi_idx])
        quantities = {
            k: float(_interp_in_ratio(r_lo, r_hi, target_ratio, v[lo_idx], v[hi_idx]))
            for k, v in columns.items()
        }
        out.append(
            FrontierSelection(
                model_size=curve.model_size,
                tokens_seen=quantities["tokens_seen"],
                ratio=target_ratio,
                target_ratio=target_ratio,
                interpolated=True,
                distance=0.0,
                quantities=quantities,
            )
        )
    return out


def _linear_fit_at_exponent(x, y, p):
    """Closed-form least squares for (offset, coefficient) at fixed exponent."""
    basis = np.column_stack([np.ones_like(x), x ** (-p)])
    coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
    resid = y - basis @ coef
    return coef[0], coef[1], float(np.sqrt(np.mean(resid**2)))


def fit_power_law(
    points: Sequence[tuple[float, float]],
    exponent_bounds: tuple[float, float] = (1e-3, 10.0),
) -> PowerLawFit:
    """Fit y = c + k * x^(-p) by least squares.

    Outer derivative-free search over the exponent (log-spaced scan
    refined by bounded scalar minimization), inner closed-form linear
    least squares for the offset and coefficient. Deterministic.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 4:
        raise ValueError("need at least 4 (x, y) points")
    x, y = pts[:, 0], pts[:, 1]
    if np.any(x <= 0.0):
        raise ValueError("x values must be positive")
    if len(np.unique(x)) != len(x):
        raise ValueError("x values must be distinct")

    if np.allclose(y, y[0], rtol=1e-13, atol=1e-300):
        return PowerLawFit(float(np.mean(y)), 0.0, float("nan"), 0.0, float("nan"), True)

    def objective(p):
        _, _, rms = _linear_fit_at_exponent(x, y, p)
        return rms if np.isfinite(rms) else np.inf

    scan = np.geomspace(exponent_bounds[0], exponent_bounds[1], 200)
    scan_vals = np.array([objective(p) for p in scan])
    if not np.any(np.isfinite(scan_vals)):
        raise RuntimeError(f"power-law fit failed: non-finite objective on {scan}")
    best = int(np.argmin(scan_vals))
    lo = scan[max(best - 1, 0)]
    hi = scan[min(best + 1, len(scan) - 1)]
    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12})
    p_hat = float(res.x)
    c, k, rms = _linear_fit_at_exponent(x, y, p_hat)
    if k <= 0.0:
        return PowerLawFit(float(np.mean(y)), 0.0, float("nan"), rms, float("nan"), True)

    # Curvature-based standard error for the exponent: second difference of
    # the squared-residual objective around the optimum.
    h = max(1e-4 * p_hat, 1e-6)
    f0 = objective(p_hat) ** 2 * len(x)
    fp = objective(p_hat + h) ** 2 * len(x)
    fm = objective(max(p_hat - h, exponent_bounds[0] / 2)) ** 2 * len(x)
    curv = (fp - 2 * f0 + fm) / h**2
    dof = max(len(x) - 3, 1)
    stderr = math.sqrt(2.0 * f0 / dof / curv) if curv > 0 else float("nan")
    return PowerLawFit(float(c), float(k), p_hat, rms, stderr, False)
