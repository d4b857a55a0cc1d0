"""Spectral numbers, spectral functions and width estimates for weighted Hardy-type operators.

The operator ``(T f)(x) = v(x) int_a^x u f`` maps L_p(a, b) to L_q(a, b).
A spectral triple ``(g, f, lam)`` solves ``g = T f``,
``f_(p) = lam T*(g_(q))`` with ``||f||_p = 1``.
"""

from .asymptotics import AsymptoticsReport, asymptote_report, constant_cpq, pi_p, weight_integral
from .errors import (
    AllZero,
    AnchorOffGrid,
    BracketFailed,
    DegenerateBlock,
    DomainError,
    Empty,
    GridMismatch,
    HardyEigenError,
    InsufficientData,
    NodalCountMissed,
    NotApplicable,
    NotConverged,
    NotPositive,
    ResourceLimit,
    ValidationError,
    WeightSyntaxError,
    ZeroImage,
)
from .function_space import Grid, Interval, SampledFunction, count_sign_changes, count_zeros
from .iteration import (
    IterationTrace,
    SignPattern,
    SpectralTriple,
    dual_transform,
    initial_sign_function,
    iterate_once,
    run_iteration,
)
from .operator import AnchoredOperator, ProblemSpec, apply_T, apply_T_star
from .oracle import ShootingConfig, classical_eigen_p2, shoot_pq_laplacian, svd_eigen_p2
from .search import SearchConfig, SpectrumResult, find_spectral_triple, lambda_extremes, sign_change_comparison
from .weights import parse_weight
from .widths import (
    WidthsReport,
    approximation_upper_bound,
    bernstein_value,
    kolmogorov_lower_bound,
    widths_report,
)

__all__ = [name for name in dir() if not name.startswith("_")]
