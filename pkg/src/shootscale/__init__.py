"""shootscale: global bifurcation curves of radially symmetric semilinear
Dirichlet problems on the unit ball, computed by the shoot-and-scale method,
with numerical certificates for fold structure.
"""
from .errors import (
    BracketLostError,
    ConfigError,
    EmptyCurveError,
    InvalidOrderError,
    LevelNotReachedError,
    NonFiniteError,
    NotApplicableError,
    NotNearCriticalError,
    PreconditionError,
    SameClassAtEndsError,
    ShootScaleError,
    StepSizeUnderflowError,
)
from .models import (
    Constant,
    Cubic,
    ExpShift,
    Limiting,
    MuForm,
    NonlinearityModel,
    PerturbedGelfand,
    PowerSum,
    eval_model,
    inflection_points,
    is_log_concave,
    log_concavity_margin,
    model_from_config,
    sturm_roots,
)
from .ivp import EventKind, EventRecord, IntegratorSettings, RadialProfile, integrate, series_start
from .shoot import Outcome, ShotResult, bvp_profile, first_zero, lambda_of_alpha
from .linearized import (
    CertificateReport,
    LinearizedProfile,
    nondegeneracy,
    nondegeneracy_integrals,
    positivity_certificate,
    solve_linearized,
    sturm_nonsingularity_check,
    test_function_search,
    variational_profile,
)
from .curve import (
    BifurcationCurve,
    CurvePoint,
    CurveSample,
    Eps0Result,
    ScanResult,
    ScanRow,
    ShapeClass,
    TraceOptions,
    TurningPoint,
    classify,
    find_epsilon0,
    refine_turning_points,
    scan_epsilon,
    solutions_at,
    trace,
)
from .transform import (
    MuPoint,
    cross_validate_map,
    from_mu,
    lemma42_map,
    limiting_fold,
    mu_monotonicity_check,
    to_mu,
)

__version__ = "0.1.0"
