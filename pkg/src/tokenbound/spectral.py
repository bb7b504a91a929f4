"""Hessian-spectrum machinery for the quantizability analysis.

Matrix-free Lanczos with full reorthogonalization, stochastic Lanczos
quadrature for the trace of the matrix square root, Hutchinson trace
estimation, Gaussian incoherence transforms, sequential LDL-driven
quantization with its quadratic error bound, the required-bits formula,
and the finite-precision spectral noise width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
import scipy.linalg

__all__ = [
    "SymmetricOperator",
    "SpectralEstimate",
    "LdlqResult",
    "LanczosBreakdown",
    "lanczos_tridiag",
    "slq_trace_sqrt",
    "shift_to_psd",
    "slq_param_sizing",
    "hutchinson_trace",
    "incoherence_transform",
    "incoherence_mu",
    "ldlq_quantize",
    "required_bits",
    "precision_noise_width",
]

_SYMMETRY_RTOL = 1e-8
_BREAKDOWN_TOL = 1e-12


@dataclass
class SymmetricOperator:
    """Matrix-free symmetric operator: dimension plus a matvec callback.

    An explicit dense form may be attached for desk-scale oracles. The
    callback must accept (dim,) vectors and (dim, k) blocks.
    """

    dim: int
    matvec: Callable[[np.ndarray], np.ndarray]
    dense: Optional[np.ndarray] = None

    @classmethod
    def from_dense(cls, matrix: np.ndarray) -> "SymmetricOperator":
        a = np.asarray(matrix, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError("matrix must be square")
        if not np.allclose(a, a.T, rtol=_SYMMETRY_RTOL, atol=1e-12):
            raise ValueError("matrix must be symmetric")
        return cls(dim=a.shape[0], matvec=lambda v: a @ v, dense=a)

    def check_symmetry(self, rng: np.random.Generator, probes: int = 3) -> None:
        """Spot-check <u, Hv> == <Hu, v> on random probes."""
        for _ in range(probes):
            u = rng.standard_normal(self.dim)
            v = rng.standard_normal(self.dim)
            left = float(u @ self.matvec(v))
            right = float(self.matvec(u) @ v)
            scale = max(abs(left), abs(right), 1e-30)
            if abs(left - right) / scale > _SYMMETRY_RTOL:
                raise ValueError("operator failed the symmetry probe")

    def shifted(self, shift: float) -> "SymmetricOperator":
        base = self.matvec
        dense = None if self.dense is None else self.dense + shift * np.eye(self.dim)
        return SymmetricOperator(self.dim, lambda v: base(v) + shift * v, dense)


@dataclass(frozen=True)
class SpectralEstimate:
    """SLQ output: per-probe quadrature nodes/weights and the aggregate
    trace-of-sqrt estimate with extremal-eigenvalue information."""

    ritz_nodes: np.ndarray        # (num_probes, steps)
    ritz_weights: np.ndarray      # (num_probes, steps), each row sums to 1
    trace_sqrt: float
    lambda_max_est: float
    lambda_min_est: float
    condition_est: float
    num_probes: int
    lanczos_steps: int
    shift_applied: float = 0.0
    seed: Optional[int] = None


class LanczosBreakdown(NamedTuple):
    happened: bool
    step: int


def _lanczos_block(matvec, probes: np.ndarray, steps: int):
    """Lanczos recurrences run in parallel over the columns of `probes`.

    Full reorthogonalization against each probe's own basis; breakdown in
    a column freezes that column's recurrence (its T is padded with zero
    off-diagonals, which leaves quadrature weights untouched).

    Returns (diag, offdiag, active_steps) with shapes
    (k, steps), (k, steps-1), (k,).
    """
    n, k = probes.shape
    q = probes / np.linalg.norm(probes, axis=0, keepdims=True)
    basis = np.zeros((steps, n, k))
    basis[0] = q
    diag = np.zeros((k, steps))
    off = np.zeros((k, max(steps - 1, 0)))
    active_steps = np.full(k, steps, dtype=int)
    alive = np.ones(k, dtype=bool)
    for j in range(steps):
        w = matvec(basis[j])
        a = np.einsum("ik,ik->k", basis[j], w)
        diag[:, j] = a
        if j == steps - 1:
            break
        w = w - a * basis[j]
        if j > 0:
            w = w - off[:, j - 1] * basis[j - 1]
        # Full reorthogonalization against the basis built so far.
        overlaps = np.einsum("jik,ik->jk", basis[: j + 1], w)
        w = w - np.einsum("jik,jk->ik", basis[: j + 1], overlaps)
        b = np.linalg.norm(w, axis=0)
        broke = alive & (b <= _BREAKDOWN_TOL * np.maximum(np.abs(a), 1.0))
        active_steps[broke] = j + 1
        alive = alive & ~broke
        safe_b = np.where(b > 0.0, b, 1.0)
        nxt = np.where(alive, w / safe_b, 0.0)
        off[:, j] = np.where(alive, b, 0.0)
        basis[j + 1] = nxt
    return diag, off, active_steps


def lanczos_tridiag(op: SymmetricOperator, steps: int, probe: np.ndarray):
    """m-step Lanczos tridiagonalization with full reorthogonalization.

    Returns (diag, offdiag, breakdown). On breakdown the shorter
    tridiagonal matrix is returned: an exact invariant subspace was found.
    """
    if steps < 1 or steps > op.dim:
        raise ValueError("steps must satisfy 1 <= steps <= dim")
    probe = np.asarray(probe, dtype=float)
    if probe.shape != (op.dim,):
        raise ValueError("probe must be a vector of the operator dimension")
    norm = np.linalg.norm(probe)
    if not math.isclose(norm, 1.0, rel_tol=1e-8):
        raise ValueError("probe must be normalized")

    def block_mv(block):
        return np.column_stack([op.matvec(block[:, i]) for i in range(block.shape[1])])

    diag, off, active = _lanczos_block(block_mv, probe[:, None], steps)
    m = int(active[0])
    breakdown = LanczosBreakdown(m < steps, m)
    return diag[0, :m].copy(), off[0, : m - 1].copy(), breakdown


def _ritz_from_tridiag(diag: np.ndarray, off: np.ndarray):
    """Batched nodes/weights: eigenvalues of each T and squared first
    components of its eigenvectors."""
    k, m = diag.shape
    t = np.zeros((k, m, m))
    idx = np.arange(m)
    t[:, idx, idx] = diag
    if m > 1:
        j = np.arange(m - 1)
        t[:, j, j + 1] = off
        t[:, j + 1, j] = off
    nodes, vecs = np.linalg.eigh(t)
    weights = vecs[:, 0, :] ** 2
    return nodes, weights


def shift_to_psd(lambda_min_est: float) -> float:
    """Spectrum shift making the operator PSD: max(0, -lambda_min_est).

    Downstream trace-of-sqrt values on the shifted operator are upper
    bounds for the PSD part and are labeled as such.
    """
    return max(0.0, -lambda_min_est)


def _estimate_extremes(op: SymmetricOperator, rng: np.random.Generator, steps: int):
    probe = rng.standard_normal(op.dim)
    probe /= np.linalg.norm(probe)
    diag, off, _ = lanczos_tridiag(op, min(steps, op.dim), probe)
    ritz = scipy.linalg.eigh_tridiagonal(diag, off, eigvals_only=True)
    return float(ritz[-1]), float(ritz[0])


def slq_trace_sqrt(
    op: SymmetricOperator,
    steps: int,
    num_probes: int,
    seed: Optional[int] = None,
    shift_mode: bool = False,
    probe_chunk: int = 2048,
) -> SpectralEstimate:
    """Stochastic Lanczos quadrature estimate of Tr(sqrt(H)).

    Rademacher probes; per-probe Gauss quadrature from the Lanczos
    tridiagonal matrix. A negative quadrature node means the operator is
    not PSD: with shift_mode the spectrum is shifted by the magnitude of
    the most negative Ritz value (yielding a labeled upper-bound
    estimate), otherwise it is an error.
    """
    if num_probes < 1:
        raise ValueError("num_probes must be >= 1")
    steps = min(steps, op.dim)
    rng = np.random.default_rng(seed)

    shift = 0.0
    work_op = op
    if shift_mode:
        _, lam_min = _estimate_extremes(op, rng, steps)
        shift = shift_to_psd(lam_min)
        if shift > 0.0:
            work_op = op.shifted(shift)

    all_nodes = []
    all_weights = []
    done = 0
    while done < num_probes:
        k = min(probe_chunk, num_probes - done)
        probes = rng.choice([-1.0, 1.0], size=(op.dim, k))
        diag, off, _ = _lanczos_block(work_op.matvec, probes, steps)
        nodes, weights = _ritz_from_tridiag(diag, off)
        all_nodes.append(nodes)
        all_weights.append(weights)
        done += k
    nodes = np.concatenate(all_nodes, axis=0)
    weights = np.concatenate(all_weights, axis=0)

    negative = nodes < -1e-10 * max(1.0, float(np.abs(nodes).max()))
    if np.any(negative & (weights > 1e-14)) and not shift_mode:
        worst = float(nodes[negative].min())
        raise ValueError(
            f"negative quadrature node {worst:.6g}: operator is not PSD "
            "(enable shift_mode for an upper-bound estimate)"
        )
    gamma = float(op.dim * np.mean(np.sum(weights * np.sqrt(np.clip(nodes, 0.0, None)), axis=1)))
    lam_max = float(nodes.max()) - shift
    lam_min = float(nodes.min()) - shift
    cond = lam_max / lam_min if lam_min > 0 else float("inf")
    return SpectralEstimate(
        ritz_nodes=nodes - shift,
        ritz_weights=weights,
        trace_sqrt=gamma,
        lambda_max_est=lam_max,
        lambda_min_est=lam_min,
        condition_est=max(cond, 1.0),
        num_probes=num_probes,
        lanczos_steps=steps,
        shift_applied=shift,
        seed=seed,
    )


def slq_param_sizing(
    kappa: float, lambda_max: float, lambda_min: float, eps: float, eta: float
) -> tuple[int, int]:
    """Lanczos steps and probe count guaranteeing relative error <= eps
    with probability >= 1-eta.

    m from the Chebyshev convergence rate (with the sqrt(kappa)/4 form as
    fallback when the rate degenerates), n_v = ceil((24/eps^2) ln(2/eta)).
    """
    if not (0.0 < eps < 1.0 and 0.0 < eta < 1.0):
        raise ValueError("eps and eta must lie in (0, 1)")
    if lambda_min <= 0.0 or lambda_max < lambda_min:
        raise ValueError("need 0 < lambda_min <= lambda_max")
    if kappa < 1.0:
        raise ValueError("kappa must be >= 1")
    num_probes = math.ceil((24.0 / eps**2) * math.log(2.0 / eta))
    if kappa == 1.0:
        return 1, num_probes
    sk = math.sqrt(kappa)
    big_k = (lambda_max - lambda_min) * (sk - 1.0) ** 2
    log_term = math.log(big_k / eps)
    rate = 2.0 * math.log((sk + 1.0) / (sk - 1.0))
    steps = math.ceil(log_term / rate) if rate > 0 else math.ceil(sk / 4.0 * log_term)
    return max(steps, 1), num_probes


def hutchinson_trace(
    op: SymmetricOperator,
    num_probes: int,
    probe_kind: str = "rademacher",
    seed: Optional[int] = None,
) -> tuple[float, float]:
    """Randomized trace estimate: mean of u^T H u over probes, plus the
    empirical variance of the per-probe values.

    Rademacher probes have fourth moment 1 and minimize the variance
    bound (2 + m4) * Tr(H^T H); Gaussian probes have m4 = 3.
    """
    if num_probes < 1:
        raise ValueError("num_probes must be >= 1")
    rng = np.random.default_rng(seed)
    if probe_kind == "rademacher":
        probes = rng.choice([-1.0, 1.0], size=(op.dim, num_probes))
    elif probe_kind == "gaussian":
        probes = rng.standard_normal((op.dim, num_probes))
    else:
        raise ValueError(f"unknown probe kind {probe_kind!r}")
    hu = op.matvec(probes)
    quads = np.einsum("ik,ik->k", probes, hu)
    estimate = float(np.mean(quads))
    variance = float(np.var(quads, ddof=1)) if num_probes > 1 else 0.0
    return estimate, variance


def incoherence_mu(eigenvectors: np.ndarray) -> float:
    """sqrt(n) * max|Q_ij|: largest eigenvector entry relative to the
    Gaussian 1/sqrt(n) scale."""
    q = np.asarray(eigenvectors, dtype=float)
    return float(math.sqrt(q.shape[0]) * np.abs(q).max())


@dataclass(frozen=True)
class IncoherenceTransform:
    transform: np.ndarray
    operator: SymmetricOperator
    mu: float
    weights: Optional[np.ndarray] = None


def incoherence_transform(
    matrix: np.ndarray,
    seed: Optional[int] = None,
    weights: Optional[np.ndarray] = None,
    orthogonal: bool = False,
) -> IncoherenceTransform:
    """Random transform spreading extreme eigenvector entries.

    P has iid N(0, 1/n) entries by default, matching the probability
    argument for the incoherence level sqrt(2 ln(2 n^2 / delta));
    orthogonal=True uses an exactly orthogonal matrix instead. Returns the
    transformed operator H_w = P^T H P, transformed weights P^T theta, and
    the measured incoherence of H_w's eigenvectors.
    """
    h = np.asarray(matrix, dtype=float)
    if h.ndim != 2 or h.shape[0] != h.shape[1]:
        raise ValueError("matrix must be square")
    n = h.shape[0]
    rng = np.random.default_rng(seed)
    if orthogonal:
        p = scipy.linalg.qr(rng.standard_normal((n, n)))[0]
    else:
        p = rng.standard_normal((n, n)) / math.sqrt(n)
    h_w = p.T @ h @ p
    h_w = (h_w + h_w.T) / 2.0
    _, q = np.linalg.eigh(h_w)
    w = None if weights is None else p.T @ np.asarray(weights, dtype=float)
    return IncoherenceTransform(p, SymmetricOperator.from_dense(h_w), incoherence_mu(q), w)


@dataclass(frozen=True)
class LdlqResult:
    """Output of the sequential LDL-driven quantizer."""

    quantized_weights: np.ndarray
    quad_error: float
    bound_value: float
    incoherence_mu: float
    grid_step: float


def _round_nearest(values: np.ndarray, step: float) -> np.ndarray:
    return np.round(values / step) * step


def _round_stochastic(values: np.ndarray, step: float, rng: np.random.Generator) -> np.ndarray:
    scaled = values / step
    lo = np.floor(scaled)
    frac = scaled - lo
    return (lo + (rng.random(values.shape) < frac)) * step


def ldlq_quantize(
    weights: np.ndarray,
    matrix: np.ndarray,
    quantizer: str = "nearest",
    grid_step: float = 1.0,
    seed: Optional[int] = None,
    mu: Optional[float] = None,
) -> LdlqResult:
    """Sequential autoregressive quantization driven by the LDL structure
    of the quadratic-form matrix.

    Solves the fixed point w_hat = Q(w + (L - I)(w - w_hat)) with L the
    unit lower-triangular factor satisfying L^T D L = H, coordinate by
    coordinate. For unbiased stochastic rounding with per-coordinate error
    variance sigma^2, the mean quadratic error sigma^2 * Tr(D) is bounded
    by (mu^2 sigma^2 / n) * Tr(sqrt(H))^2 for mu-incoherent H.
    """
    w = np.asarray(weights, dtype=float)
    h = np.asarray(matrix, dtype=float)
    n = len(w)
    if h.shape != (n, n):
        raise ValueError("matrix shape must match the weight vector")
    if grid_step <= 0.0:
        raise ValueError("grid_step must be positive")
    evals, evecs = np.linalg.eigh((h + h.T) / 2.0)
    if evals[0] <= 0.0:
        raise ValueError(
            f"matrix is not positive definite (min eigenvalue {evals[0]:.6g}); "
            "shift the spectrum first"
        )
    # L^T D L = H with L unit lower triangular <=> H = U D U^T, L = U^T.
    u, d, perm = scipy.linalg.ldl(h, lower=False)
    if not np.array_equal(perm, np.arange(n)):
        raise ValueError("LDL factorization required pivoting; matrix is ill-conditioned")
    lower = u.T

    rng = np.random.default_rng(seed)
    if quantizer == "nearest":
        rounder = lambda x: float(_round_nearest(np.asarray([x]), grid_step)[0])
    elif quantizer == "stochastic":
        rounder = lambda x: float(_round_stochastic(np.asarray([x]), grid_step, rng)[0])
    else:
        raise ValueError(f"unknown quantizer {quantizer!r}")

    w_hat = np.zeros(n)
    err = np.zeros(n)  # w - w_hat for already-quantized coordinates
    for i in range(n):
        target = w[i] + lower[i, :i] @ err[:i]
        w_hat[i] = rounder(target)
        err[i] = w[i] - w_hat[i]

    diff = w_hat - w
    quad_error = float(diff @ h @ diff)
    measured_mu = incoherence_mu(evecs) if mu is None else mu
    sigma_sq = grid_step**2 / 4.0
    trace_sqrt = float(np.sum(np.sqrt(evals)))
    bound = measured_mu**2 * sigma_sq / n * trace_sqrt**2
    return LdlqResult(w_hat, quad_error, bound, measured_mu, grid_step)


def required_bits(trace_sqrt: float, num_params: int, quant_budget: float, delta_fail: float) -> float:
    """Bits per parameter sufficient for a target quadratic quantization
    error: log2(Tr(sqrt(H)) / sqrt(N*Q)) + 0.5*log2(ln(2N^2/delta)) - 0.5.

    May be negative for very flat spectra; reported raw.
    """
    if trace_sqrt <= 0.0 or num_params < 1 or quant_budget <= 0.0:
        raise ValueError("trace_sqrt, num_params and quant_budget must be positive")
    if not 0.0 < delta_fail < 1.0:
        raise ValueError("delta_fail must lie in (0, 1)")
    log_log = math.log(2.0 * num_params**2 / delta_fail)
    return (
        math.log2(trace_sqrt / math.sqrt(num_params * quant_budget))
        + 0.5 * math.log2(log_log)
        - 0.5
    )


def precision_noise_width(
    diag_squares: np.ndarray, total_params: int, sample_size: int, eps_mantissa: float
) -> float:
    """Spectral width below which Ritz structure is attributable to
    finite-precision noise: sqrt(P * eps^2 * sum(a^2) / (N * (1 + eps^2))).

    The mantissa epsilon is a free parameter; formats differ and stated
    values in the literature are inconsistent with IEEE half precision.
    """
    sq = np.asarray(diag_squares, dtype=float)
    if sq.size == 0:
        raise ValueError("diag_squares must be non-empty")
    if np.any(sq < 0.0):
        raise ValueError("squared entries must be nonnegative")
    if total_params < 1 or sample_size < 1:
        raise ValueError("total_params and sample_size must be >= 1")
    if eps_mantissa < 0.0:
        raise ValueError("eps_mantissa must be nonnegative")
    e2 = eps_mantissa**2
    return math.sqrt(total_params * e2 * float(np.sum(sq)) / (sample_size * (1.0 + e2)))
