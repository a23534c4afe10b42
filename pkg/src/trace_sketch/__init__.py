"""Matrix-free stochastic trace and log-determinant estimation.

Randomized probing (Gaussian, Rademacher, unit-basis) of implicit symmetric
matrices, Lanczos/Gauss quadrature for quadratic forms x^T f(A) x, and the
tail-bound engine that plans sample sizes and iteration counts so estimates
ship with certified (epsilon, delta) statements.
"""

from .bounds import (
    ComparisonBounds,
    Envelope,
    NormData,
    PlanResult,
    comparison_bounds,
    gaussian_envelope,
    gaussian_sample_plan,
    gaussian_tail,
    gaussian_tightness_bound,
    logdet_plan_gaussian,
    logdet_plan_rademacher,
    logdet_plan_simplified,
    rademacher_envelope,
    rademacher_sample_plan,
    rademacher_tail,
    spsd_relative_plans,
)
from .estimator import (
    EstimateReport,
    EstimationError,
    QuadraticFormEvaluator,
    adaptive_log_evaluator,
    estimate_diag_trace,
    estimate_trace,
    exact_evaluator,
    lanczos_evaluator,
)
from .lanczos import (
    EllipseBound,
    LanczosResult,
    QuadratureDomainError,
    TridiagonalMatrix,
    approx_quadratic_form_log,
    ellipse_error_bound,
    estimate_spectral_interval,
    evaluate_quadrature,
    lanczos_tridiagonalize,
    lobatto_lower_bound,
    log_lanczos_bound,
    max_log_on_ellipse,
)
from .logdet import (
    LogDetRun,
    estimate_logdet,
    estimate_logdet_adaptive,
    rescale_shift_identity_check,
)
from .operators import (
    MatrixMarketError,
    PolynomialOfOperator,
    SparseSymmetricMatrix,
    SymmetricOperator,
    exact_norms,
    from_dense,
    gen_lowrank,
    gen_random_spd,
    gen_tightness_gaussian,
    gen_tightness_rademacher,
    identity_operator,
    load_matrix_market,
    scaled_identity,
    triangle_operator,
)
from .probes import ProbeKind, ProbeStream, next_probe

__version__ = "0.1.0"
