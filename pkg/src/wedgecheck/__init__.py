"""wedgecheck: numerical verification for first-order elliptic wedge operators.

Given a first-order wedge differential operator on a model edge (cone bundle
over a compact edge), the toolkit computes the indicial pencil, boundary
spectrum, trace space, Green pairing, normal-family kernel bundle and
extension operator, and mechanically checks the ellipticity conditions:
w-ellipticity, weight-line clearance, injectivity on the minimal domain,
surjectivity on the maximal domain, and the generalized Lopatinskii
(boundary isomorphism) condition.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigurationError,
    ContourError,
    ConvergenceError,
    DegenerateSymbolError,
    DifferentiationError,
    ExtractionError,
    ResonanceError,
    ShapeError,
    WedgecheckError,
    WeightLineError,
    WEllipticityError,
)
from .fiber import (
    ConeFunction,
    ConeGrid,
    FiberModel,
    build_fiber,
    cone_function,
    cone_inner,
    cone_norm,
    fiber_inner,
    kappa_apply,
)
from .indicial import (
    BoundarySpectrum,
    CoefficientField,
    IndicialPencil,
    TraceSpace,
    WedgeOp,
    assemble_pencil,
    boundary_spectrum,
    build_trace_space,
)
from .mellin import (
    Cutoff,
    PairingMatrix,
    RectContour,
    default_contour,
    g_adjoint_spectrum_mismatch,
    green_pairing,
    kappa_conjugation_residual,
    mellin_singular,
    pairing_nondegenerate,
    skew_adjoint_residual,
    trace_gram,
)
from .cone import (
    KernelBasis,
    SweepResult,
    cone_symbol,
    decay_splitting,
    kernel_bundle_sweep,
    kernel_equivariance,
    kernel_max,
    trace_extract,
    trace_rank,
    twisted_homogeneity_residual,
)
from .edgesym import (
    EdgeFunction,
    MetricBracket,
    TwistedSymbol,
    boundary_limit_errors,
    boundary_symbol,
    collar_trace_coefficients,
    edge_sobolev_norm,
    extension_apply,
    extension_symbol,
    leibniz_remainder_check,
    normal_family_symbol,
    symbol_estimate_check,
    twisted_homog_check,
)
from .checker import (
    BatteryReport,
    BoundarySampler,
    LopatinskiiVerdict,
    ProjectionSampler,
    RankReport,
    WEllipticityReport,
    aps_projection_construct,
    atiyah_bott_rank_report,
    cosphere_covectors,
    identity_boundary,
    identity_projection,
    kernel_isomorphism_boundary,
    lopatinskii_check,
    report_emit,
    run_condition_battery,
    w_ellipticity_check,
)
from .config import ProblemConfig, emit_config, load_config, parse_config
from .models import build_model

__all__ = [
    "__version__",
    # errors
    "ConfigurationError", "ContourError", "ConvergenceError",
    "DegenerateSymbolError", "DifferentiationError", "ExtractionError",
    "ResonanceError", "ShapeError", "WedgecheckError", "WeightLineError",
    "WEllipticityError",
    # fiber geometry
    "ConeFunction", "ConeGrid", "FiberModel", "build_fiber", "cone_function",
    "cone_inner", "cone_norm", "fiber_inner", "kappa_apply",
    # indicial data
    "BoundarySpectrum", "CoefficientField", "IndicialPencil", "TraceSpace",
    "WedgeOp", "assemble_pencil", "boundary_spectrum", "build_trace_space",
    # Mellin / pairing
    "Cutoff", "PairingMatrix", "RectContour", "green_pairing",
    "default_contour", "g_adjoint_spectrum_mismatch",
    "kappa_conjugation_residual", "mellin_singular", "pairing_nondegenerate",
    "skew_adjoint_residual", "trace_gram",
    # cone solver
    "KernelBasis", "SweepResult", "cone_symbol", "decay_splitting",
    "kernel_bundle_sweep", "kernel_equivariance", "kernel_max",
    "trace_extract", "trace_rank", "twisted_homogeneity_residual",
    # edge symbols
    "EdgeFunction", "MetricBracket", "TwistedSymbol", "boundary_limit_errors",
    "boundary_symbol", "collar_trace_coefficients", "edge_sobolev_norm",
    "extension_apply", "extension_symbol", "leibniz_remainder_check",
    "normal_family_symbol", "symbol_estimate_check", "twisted_homog_check",
    # condition battery
    "BatteryReport", "BoundarySampler", "LopatinskiiVerdict",
    "ProjectionSampler", "RankReport", "WEllipticityReport",
    "aps_projection_construct", "atiyah_bott_rank_report",
    "cosphere_covectors",
    "identity_boundary", "identity_projection", "kernel_isomorphism_boundary",
    "lopatinskii_check",
    "report_emit", "run_condition_battery", "w_ellipticity_check",
    # configuration
    "ProblemConfig", "emit_config", "load_config", "parse_config",
    # model catalog
    "build_model",
]
