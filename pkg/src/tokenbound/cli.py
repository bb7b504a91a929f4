"""Command-line surface tying the modules together.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""

from __future__ import annotations

import functools
import sys

import click
import numpy as np

from . import io as tio
from .assembly import BoundConfig, assemble_bound
from .concentration import (
    DeviationSequence,
    default_grid,
    freedman_bound_maintext,
    sigma_grid,
)
from .harness import (
    TokenProcessSpec,
    coverage_test,
    leading_term_slope,
    tightness_report,
)
from .prequential import (
    asymptotic_kh,
    crossover_point,
    exact_excess_sum,
    prequential_complexity,
    prequential_kh,
)
from .scaling import ChinchillaParams, fit_power_law, optimal_allocation, select_frontier
from .smoothing import optimal_alpha, smoothing_guarantee
from .spectral import (
    SymmetricOperator,
    ldlq_quantize,
    required_bits,
    slq_param_sizing,
    slq_trace_sqrt,
)

EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3


def _run(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        try:
            return func(*args, **kwargs)
        except (ValueError, FileNotFoundError, KeyError) as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(EXIT_VALIDATION)
        except (RuntimeError, FloatingPointError, np.linalg.LinAlgError) as exc:
            click.echo(f"numerical failure: {exc}", err=True)
            sys.exit(EXIT_NUMERICAL)

    return wrapper


def _emit(obj, fmt, out):
    text = tio.emit_report(obj, fmt)
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        click.echo(text, nl=False)


fmt_option = click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
out_option = click.option("--out", type=click.Path(), default=None, help="Output file (stdout if omitted).")
delta_option = click.option("--delta", type=float, default=0.01, show_default=True)
grid_option = click.option("--grid-size", type=int, default=1000, show_default=True)


@click.group()
def main():
    """Token-level generalization bound toolkit."""


@main.group()
def bound():
    """Assembled bound evaluation and Monte Carlo validation."""


@bound.command("eval")
@click.option("--trace", "trace_path", type=click.Path(exists=True), required=True)
@click.option("--params", "num_params", type=int, required=True)
@click.option("--tokens", "num_tokens", type=int, required=True)
@click.option("--bits", type=float, default=4.0, show_default=True)
@delta_option
@grid_option
@click.option("--complexity-override", type=float, default=None)
@click.option("--literal", is_flag=True, help="Apply the bound to raw quantized losses.")
@fmt_option
@out_option
@_run
def bound_eval(trace_path, num_params, num_tokens, bits, delta, grid_size,
               complexity_override, literal, fmt, out):
    """Evaluate the assembled bound on a trace file."""
    trace = tio.load_trace(trace_path)
    cfg = BoundConfig(
        num_params=num_params,
        num_tokens=num_tokens,
        vocab=trace.vocab,
        bits_per_param=bits,
        delta_fail=delta,
        grid=default_grid(grid_size),
        complexity_override=complexity_override,
        literal_mode=literal,
    )
    _emit(assemble_bound(trace, cfg), fmt, out)


@bound.command("mc")
@click.option("--suite", type=click.Choice(["coverage", "tightness", "slopes"]), default="coverage")
@click.option("--vocab", type=int, default=16, show_default=True)
@click.option("--kind", type=click.Choice(["dirichlet_categorical", "markov_drift", "adversarial_variance"]),
              default="dirichlet_categorical")
@click.option("--profile", type=click.Choice(["low", "medium", "high"]), default="medium")
@click.option("--horizon", type=int, default=500, show_default=True)
@click.option("--trials", type=int, default=500, show_default=True)
@click.option("--delta", type=float, default=0.05, show_default=True)
@click.option("--grid-size", type=int, default=100, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@fmt_option
@out_option
@_run
def bound_mc(suite, vocab, kind, profile, horizon, trials, delta, grid_size, seed, fmt, out):
    """Run coverage / tightness Monte Carlo suites on synthetic processes."""
    spec = TokenProcessSpec(vocab=vocab, process_kind=kind, horizon=horizon,
                            variance_profile=profile, seed=seed)
    if suite == "coverage":
        grid = default_grid(grid_size)
        result = coverage_test(
            lambda seq, dr: freedman_bound_maintext(seq, dr, grid, delta).bound,
            spec, trials, delta,
        )
        _emit({"suite": "coverage", "spec": spec.label(), **result._asdict()}, fmt, out)
    elif suite == "tightness":
        rows = tightness_report([spec], trials=trials, delta_fail=delta,
                                grid=default_grid(grid_size))
        _emit(rows, fmt, out)
    else:
        _emit(leading_term_slope([10**3, 10**4, 10**5, 10**6, 10**7], 100.0, delta), fmt, out)


@main.command("sigma")
@click.option("--trace", "trace_path", type=click.Path(exists=True), required=True)
@click.option("--delta-range", type=float, required=True)
@click.option("--complexity", type=float, required=True)
@grid_option
@fmt_option
@out_option
@_run
def sigma_cmd(trace_path, delta_range, complexity, grid_size, fmt, out):
    """Variance proxy only, from a trace's quantized-loss columns."""
    trace = tio.load_trace(trace_path)
    seq = DeviationSequence(trace.nll_quant, trace.proxy_mean_quant)
    result = sigma_grid(seq, delta_range, complexity, default_grid(grid_size))
    _emit({"sigma": result.sigma, "argmin_s": result.argmin_s,
           "rms_upper": result.rms_upper}, fmt, out)


@main.command("smooth")
@click.option("--complexity", type=float, required=True)
@click.option("--vocab", type=int, required=True)
@click.option("--risk", type=float, default=0.0, show_default=True)
@fmt_option
@out_option
@_run
def smooth_cmd(complexity, vocab, risk, fmt, out):
    """Optimal mixing weight, worst-case loss, and smoothing overhead."""
    spec = optimal_alpha(complexity, vocab)
    _emit({
        "alpha": spec.alpha,
        "worst_case_nats": spec.worst_case_nats,
        "guarantee": smoothing_guarantee(risk, complexity, vocab),
    }, fmt, out)


@main.group()
def preq():
    """Prequential information accounting."""


@preq.command("kh")
@click.option("--curve", "curve_path", type=click.Path(exists=True), required=True)
@fmt_option
@out_option
@_run
def preq_kh(curve_path, fmt, out):
    """Information estimate from an online/final loss curve CSV."""
    est = prequential_kh(tio.load_online_loss_curve(curve_path))
    _emit(est._asdict(), fmt, out)


@preq.command("asymptotic")
@click.option("--coef-b", type=float, required=True)
@click.option("--beta", type=float, required=True)
@click.option("--tokens", type=int, required=True)
@fmt_option
@out_option
@_run
def preq_asymptotic(coef_b, beta, tokens, fmt, out):
    params = ChinchillaParams(0.0, 1.0, coef_b, 0.5, beta)
    _emit({
        "asymptotic_nats": asymptotic_kh(params, 1, tokens),
        "exact_sum_nats": exact_excess_sum(coef_b, beta, tokens),
    }, fmt, out)


@preq.command("crossover")
@click.option("--coef-bits", type=float, required=True)
@click.option("--exponent", type=float, required=True)
@click.option("--bits", type=float, default=4.0, show_default=True)
@fmt_option
@out_option
@_run
def preq_crossover(coef_bits, exponent, bits, fmt, out):
    result = crossover_point(coef_bits, exponent, bits)
    _emit({"n_cross": result.n_cross, "has_crossover": result.has_crossover}, fmt, out)


@preq.command("complexity")
@click.option("--kh-nats", type=float, required=True)
@click.option("--tokens", type=int, required=True)
@grid_option
@delta_option
@fmt_option
@out_option
@_run
def preq_complexity(kh_nats, tokens, grid_size, delta, fmt, out):
    _emit({"complexity": prequential_complexity(kh_nats, tokens, grid_size, delta)}, fmt, out)


@main.group()
def scaling():
    """Scaling-law fits, frontier selection, compute allocation."""


@scaling.command("fit")
@click.option("--csv", "csv_path", type=click.Path(exists=True), required=True,
              help="CSV with columns x,y.")
@fmt_option
@out_option
@_run
def scaling_fit(csv_path, fmt, out):
    data = np.loadtxt(csv_path, delimiter=",", skiprows=1, ndmin=2)
    fit = fit_power_law(list(zip(data[:, 0], data[:, 1])))
    _emit({
        "offset": fit.offset, "coefficient": fit.coefficient,
        "exponent": fit.exponent, "rms_residual": fit.rms_residual,
        "stderr_exponent": fit.stderr_exponent, "degenerate": fit.degenerate,
    }, fmt, out)


@scaling.command("frontier")
@click.option("--csv", "csv_path", type=click.Path(exists=True), required=True)
@click.option("--target-ratio", type=float, default=1 / 20, show_default=True)
@fmt_option
@out_option
@_run
def scaling_frontier(csv_path, target_ratio, fmt, out):
    curves = tio.load_checkpoint_curves(csv_path)
    rows = [
        {
            "model_size": s.model_size,
            "tokens_seen": s.tokens_seen,
            "ratio": s.ratio,
            "interpolated": s.interpolated,
            "distance": s.distance,
            **{f"q_{k}": v for k, v in s.quantities.items()},
        }
        for s in select_frontier(curves, target_ratio)
    ]
    _emit(rows, fmt, out)


@scaling.command("allocate")
@click.option("--compute", type=float, required=True)
@click.option("--irreducible", type=float, default=1.69, show_default=True)
@click.option("--coef-a", type=float, default=406.4, show_default=True)
@click.option("--coef-b", type=float, default=410.7, show_default=True)
@click.option("--alpha", type=float, default=0.34, show_default=True)
@click.option("--beta", type=float, default=0.37, show_default=True)
@fmt_option
@out_option
@_run
def scaling_allocate(compute, irreducible, coef_a, coef_b, alpha, beta, fmt, out):
    params = ChinchillaParams(irreducible, coef_a, coef_b, alpha, beta)
    result = optimal_allocation(params, compute)
    _emit(result._asdict(), fmt, out)


@main.group()
def spectral():
    """Spectrum-based quantizability analysis."""


@spectral.command("slq")
@click.option("--matrix", "matrix_path", type=click.Path(exists=True), required=True)
@click.option("--steps", type=int, default=None, help="Lanczos steps (sized from eps/eta if omitted).")
@click.option("--probes", type=int, default=None)
@click.option("--eps", type=float, default=0.05, show_default=True)
@click.option("--eta", type=float, default=0.1, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--shift", "shift_mode", is_flag=True, help="Shift spectrum to PSD (upper-bound mode).")
@fmt_option
@out_option
@_run
def spectral_slq(matrix_path, steps, probes, eps, eta, seed, shift_mode, fmt, out):
    op = SymmetricOperator.from_dense(tio.load_matrix(matrix_path))
    if steps is None or probes is None:
        evals = np.linalg.eigvalsh(op.dense)
        lam_min = max(float(evals[0]), 1e-12)
        m, nv = slq_param_sizing(float(evals[-1]) / lam_min, float(evals[-1]), lam_min, eps, eta)
        steps = steps if steps is not None else m
        probes = probes if probes is not None else nv
    est = slq_trace_sqrt(op, steps, probes, seed=seed, shift_mode=shift_mode)
    _emit({
        "trace_sqrt": est.trace_sqrt,
        "lambda_max_est": est.lambda_max_est,
        "lambda_min_est": est.lambda_min_est,
        "condition_est": est.condition_est,
        "num_probes": est.num_probes,
        "lanczos_steps": est.lanczos_steps,
        "shift_applied": est.shift_applied,
        "node_histogram": [list(map(float, h)) for h in np.histogram(est.ritz_nodes.ravel(), bins=50)],
    }, fmt, out)


@spectral.command("ldlq")
@click.option("--matrix", "matrix_path", type=click.Path(exists=True), required=True)
@click.option("--weights", "weights_path", type=click.Path(exists=True), required=True)
@click.option("--bits", type=float, default=4.0, show_default=True)
@click.option("--quantizer", type=click.Choice(["nearest", "stochastic"]), default="nearest")
@click.option("--seed", type=int, default=0, show_default=True)
@fmt_option
@out_option
@_run
def spectral_ldlq(matrix_path, weights_path, bits, quantizer, seed, fmt, out):
    h = tio.load_matrix(matrix_path)
    w = tio.load_matrix(weights_path).ravel()
    result = ldlq_quantize(w, h, quantizer=quantizer, grid_step=2.0 ** (-bits), seed=seed)
    _emit({
        "quad_error": result.quad_error,
        "bound_value": result.bound_value,
        "incoherence_mu": result.incoherence_mu,
        "grid_step": result.grid_step,
        "quantized_weights": list(map(float, result.quantized_weights)),
    }, fmt, out)


@spectral.command("bits")
@click.option("--trace-sqrt", type=float, required=True)
@click.option("--params", "num_params", type=int, required=True)
@click.option("--budget", type=float, required=True)
@delta_option
@fmt_option
@out_option
@_run
def spectral_bits(trace_sqrt, num_params, budget, delta, fmt, out):
    _emit({"required_bits": required_bits(trace_sqrt, num_params, budget, delta)}, fmt, out)


@main.command("report")
@click.option("--in", "in_path", type=click.Path(exists=True), required=True)
@fmt_option
@out_option
@_run
def report_cmd(in_path, fmt, out):
    """Convert an emitted JSON report to another format."""
    with open(in_path, encoding="utf-8") as fh:
        payload = tio.load_report(fh.read())
    kind = payload.pop("kind", "generic")
    obj = payload["rows"] if kind == "comparison_table" else payload
    _emit(obj, fmt, out)


if __name__ == "__main__":
    main()
