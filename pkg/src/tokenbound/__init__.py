"""Token-level generalization bounds for compute-optimally sized models.

Martingale concentration with a variance proxy, label smoothing, prefix
coding of hypothesis classes, bound assembly, compute-optimal scaling
arithmetic, prequential information accounting, and spectrum-based
quantizability analysis.
"""

from .assembly import (
    BoundConfig,
    BoundReport,
    TokenTrace,
    assemble_bound,
    classify_vacuity,
)
from .coding import (
    CodeLength,
    kraft_partial_sum,
    prefix_code_length,
    quantized_code_length,
    union_complexity,
)
from .concentration import (
    ConcentrationResult,
    DeviationSequence,
    GridK,
    SigmaResult,
    azuma_baseline,
    default_grid,
    freedman_bound_appendix,
    freedman_bound_maintext,
    hoeffding_subsample_correction,
    sigma_grid,
    v_func,
)
from .harness import (
    CoverageResult,
    GeneratedTrace,
    TokenProcessSpec,
    coverage_test,
    generate_trace,
    leading_term_slope,
    tightness_report,
)
from .io import (
    emit_report,
    load_checkpoint_curves,
    load_matrix,
    load_online_loss_curve,
    load_report,
    load_trace,
    save_trace,
)
from .prequential import (
    CrossoverResult,
    InfoEstimate,
    OnlineLossCurve,
    asymptotic_kh,
    crossover_point,
    exact_excess_sum,
    prequential_complexity,
    prequential_kh,
)
from .scaling import (
    REFERENCE_PARAMS,
    AllocationResult,
    CheckpointCurve,
    ChinchillaParams,
    FrontierSelection,
    PowerLawFit,
    chinchilla_risk,
    fit_power_law,
    optimal_allocation,
    select_frontier,
)
from .smoothing import SmoothingSpec, optimal_alpha, smooth_nll, smoothing_guarantee
from .spectral import (
    LanczosBreakdown,
    LdlqResult,
    SpectralEstimate,
    SymmetricOperator,
    hutchinson_trace,
    incoherence_mu,
    incoherence_transform,
    lanczos_tridiag,
    ldlq_quantize,
    precision_noise_width,
    required_bits,
    shift_to_psd,
    slq_param_sizing,
    slq_trace_sqrt,
)

__version__ = "0.1.0"

__all__ = [
    "BoundConfig", "BoundReport", "TokenTrace", "assemble_bound", "classify_vacuity",
    "CodeLength", "kraft_partial_sum", "prefix_code_length",
    "quantized_code_length", "union_complexity",
    "ConcentrationResult", "DeviationSequence", "GridK", "SigmaResult",
    "azuma_baseline", "default_grid", "freedman_bound_appendix",
    "freedman_bound_maintext", "hoeffding_subsample_correction", "sigma_grid", "v_func",
    "CoverageResult", "GeneratedTrace", "TokenProcessSpec", "coverage_test",
    "generate_trace", "leading_term_slope", "tightness_report",
    "emit_report", "load_checkpoint_curves", "load_matrix",
    "load_online_loss_curve", "load_report", "load_trace", "save_trace",
    "CrossoverResult", "InfoEstimate", "OnlineLossCurve", "asymptotic_kh",
    "crossover_point", "exact_excess_sum", "prequential_complexity", "prequential_kh",
    "REFERENCE_PARAMS", "AllocationResult", "CheckpointCurve", "ChinchillaParams",
    "FrontierSelection", "PowerLawFit", "chinchilla_risk", "fit_power_law",
    "optimal_allocation", "select_frontier",
    "SmoothingSpec", "optimal_alpha", "smooth_nll", "smoothing_guarantee",
    "LanczosBreakdown", "LdlqResult", "SpectralEstimate", "SymmetricOperator",
    "hutchinson_trace", "incoherence_mu", "incoherence_transform", "lanczos_tridiag",
    "ldlq_quantize", "precision_noise_width", "required_bits", "shift_to_psd",
    "slq_param_sizing", "slq_trace_sqrt",
    "__version__",
]
