"""Jensen gaps and their two-sided bounds under a change of measure."""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    AbsoluteContinuityViolated,
    ClassifierContradiction,
    DomainError,
    JensenGapError,
    NonConvergence,
    NotConcave,
    NotConvex,
    NotStrictlyConvex,
    ParseError,
    TheoremViolation,
    ValidationError,
)
from .funcspace import FuncExpr, Interval, check_convexity, parse_expr  # noqa: E402
from .gap import (  # noqa: E402
    amgm_bounds,
    classify_equality,
    concave_bounds,
    conditional_variance_bound,
    dragomir_bounds,
    dragomir_lower,
    dragomir_upper,
    equality_transfer_check,
    jensen_gap,
)
from .measure import DiscreteMeasure, density_ratio, tilt, truncate  # noqa: E402
