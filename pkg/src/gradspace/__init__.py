"""Gradient-based detection of dominant input subspaces and reduced surrogates."""

from .core import (
    ActiveSubspace,
    Hyperrectangle,
    JacobianSamples,
    detect_subspace,
    estimate_c_hat,
    finite_difference_jacobian,
    rms_directional_variation,
    subspace_distance,
    suggest_truncation,
    truncate,
)
from .completion import RevealedEntries, SvtParams, SvtResult, reveal_uniform, svt_complete
from .geometry import (
    Membership,
    MembershipKind,
    ReducedDesign,
    ReducedDomain,
    SamplerStats,
    build_reduced_design,
    build_reduced_domain,
    lift,
    membership,
    sample_reduced,
)
from .lp import LinearProgram, LpSolution, LpStatus, minimize_linear_over_box, solve
from .surrogate import RbfConfig, RbfSurrogate, evaluate, fit, predict

__version__ = "0.1.0"

__all__ = [
    "ActiveSubspace",
    "Hyperrectangle",
    "JacobianSamples",
    "LinearProgram",
    "LpSolution",
    "LpStatus",
    "Membership",
    "MembershipKind",
    "RbfConfig",
    "RbfSurrogate",
    "ReducedDesign",
    "ReducedDomain",
    "RevealedEntries",
    "SamplerStats",
    "SvtParams",
    "SvtResult",
    "build_reduced_design",
    "build_reduced_domain",
    "detect_subspace",
    "estimate_c_hat",
    "evaluate",
    "finite_difference_jacobian",
    "fit",
    "lift",
    "membership",
    "minimize_linear_over_box",
    "predict",
    "reveal_uniform",
    "rms_directional_variation",
    "sample_reduced",
    "solve",
    "subspace_distance",
    "suggest_truncation",
    "svt_complete",
    "truncate",
    "__version__",
]
