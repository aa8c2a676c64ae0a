from typing import Dict

CONVERGES_STR: str = "CONVERGES"
DIVERGES_STR: str = "DIVERGES"
INCONCLUSIVE_STR: str = "INCONCLUSIVE"

PRODUCT_STR: str = "product"
POWER_LOG_STR: str = "power_log"
TABULATED_STR: str = "tabulated"

NORMAL_STR: str = "normal"
TWO_POINT_STR: str = "two_point"
UNIFORM_STR: str = "uniform"
SYMMETRIC_PARETO_STR: str = "symmetric_pareto"
CONSTANT_STR: str = "constant"

IID_STR: str = "iid"
ORTHO_MARTINGALE_STR: str = "ortho_martingale"
MOVING_AVERAGE_STR: str = "moving_average"

HOMOGENEOUS_STR: str = "homogeneous"
SEPARABLE_DENSITY_STR: str = "separable_density"
INDEPENDENT_STR: str = "independent"
POSITION_SCALED_STR: str = "position_scaled"

VERB_CHECK_SERIES_STR: str = "check-series"
VERB_SIMULATE_SLLN_STR: str = "simulate-slln"
VERB_SIMULATE_PPP_STR: str = "simulate-ppp"
VERB_COUNTEREXAMPLE_STR: str = "counterexample"
VERB_KRONECKER_CHECK_STR: str = "kronecker-check"
VERB_DELTA_STR: str = "delta"

ALL_VERBS: tuple[str, ...] = (
    VERB_CHECK_SERIES_STR,
    VERB_SIMULATE_SLLN_STR,
    VERB_SIMULATE_PPP_STR,
    VERB_COUNTEREXAMPLE_STR,
    VERB_KRONECKER_CHECK_STR,
    VERB_DELTA_STR,
)

CONDITION_EQ4_STR: str = "eq4"
CONDITION_EQUAL_MOMENT_STR: str = "equal-moment"
CONDITION_ALPHA_STR: str = "alpha"
CONDITION_THREE_SERIES_STR: str = "three-series"
CONDITION_COVARIANCE_STR: str = "covariance"
CONDITION_PP_STR: str = "pp-condition"
CONDITION_BRUNK_PROHOROV_1D_STR: str = "brunk-prohorov-1d"
CONDITION_MEASURE_ALPHA_STR: str = "measure-alpha"

EXIT_OK: int = 0
EXIT_ASSERTION_FAILED: int = 1
EXIT_CONFIG_ERROR: int = 2

# Dense fields above this many lattice points are refused.
MAX_FIELD_POINTS: int = 2**24

# Default computed box side per axis for series certification, keyed by r (r >= 3 uses the last entry).
DEFAULT_SERIES_BOX_SIDE: Dict[int, int] = {1: 512, 2: 512, 3: 64}

DELTA_NONNEG_TOLERANCE: float = 1e-12
TRUNCATION_BOUND_SLACK: float = 1e-9
QUAD_ABS_TOLERANCE: float = 1e-10
FLOAT_FORMAT: str = ".17g"

LOG_FILE_MAX_BYTES: int = 1048576 * 50  # 50MB
