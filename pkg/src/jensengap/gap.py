"""Jensen gaps under a change of measure, with the two-sided ratio bounds.

For P << Q the gap ``E_P phi(X) - phi(E_P X)`` lies between
``ess inf dP/dQ`` and ``ess sup dP/dQ`` times the same gap under Q. Everything
in this module works on finite discrete measures, where all integrals are
finite sums and the equality cases can be decided exactly up to tolerance.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    ClassifierContradiction,
    NonpositiveValue,
    NotConcave,
    NotConvex,
    NotStrictlyConvex,
    RangeNotContained,
    TheoremViolation,
    ValidationError,
)
from .funcspace import FuncExpr, as_expr, classify_on_points, parse_expr
from .measure import (
    DiscreteMeasure,
    RatioProfile,
    _aligned_values,
    aligned_weights,
    condition,
    density_ratio,
)

TOL = 1e-9
# relative size below which a computed gap is treated as roundoff and snapped to 0
ROUNDOFF = 1e-13
MEASURE_EQ_TOL = 1e-12

CASE1 = "case1-both-infinite"
CASE2 = "case2-both-zero"
CASE3 = "case3-equal-finite"
STRICT = "strict-inequality"
TRIVIAL = "trivial-equal-measures"


def times(factor: float, gap: float) -> float:
    """Product with the measure-theoretic convention inf * 0 = 0."""
    if gap == 0.0:
        return 0.0
    return factor * gap


def tolerance(*values: float) -> float:
    return TOL * max([1.0] + [abs(v) for v in values if math.isfinite(v)])


@dataclass(frozen=True)
class GapBoundReport:
    gap_P: float
    gap_Q: float
    ess_sup: float
    ess_inf: float
    upper_bound: float
    lower_bound: float
    upper_slack: float
    lower_slack: float
    gap_P_finite: bool = True
    gap_Q_finite: bool = True
    # "convex": E phi(X) - phi(E X); "concave": phi(E X) - E phi(X); "amgm": E X - exp(E log X)
    orientation: str = "convex"
    mean_P: float = math.nan
    mean_Q: float = math.nan
    # ||dQ/dP||_inf when ess_inf > 0, i.e. when Q << P as well
    inverse_ess_sup: float | None = None
    notes: tuple = ()

    @property
    def sandwich_holds(self) -> bool:
        tol = tolerance(self.gap_Q, self.upper_bound)
        return self.lower_slack >= -tol and self.upper_slack >= -tol

    def to_dict(self) -> dict:
        d = asdict(self)
        d["notes"] = list(self.notes)
        return d


@dataclass(frozen=True)
class EqualityDiagnosis:
    case: str
    shared_value: float | None
    cond_a: bool
    cond_b: bool
    cond_c: bool
    numeric_equal: bool
    evidence: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# helpers


def _support_values(mu_weights: np.ndarray, X: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(X, dtype=float)
    mask = mu_weights > 0.0
    return mu_weights[mask], x[mask]


def _check_range(phi: FuncExpr, x: np.ndarray):
    outside = [float(v) for v in x if not phi.domain.contains(float(v))]
    if outside:
        raise RangeNotContained(f"X takes values {outside} outside the domain {phi.domain} of {phi}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("X must be finite on the support")


def _raw_gap(w: np.ndarray, x: np.ndarray, phi: FuncExpr) -> tuple[float, float]:
    """(gap, mean) of X under weights ``w`` already restricted to the support."""
    mean = math.fsum(w * x)
    if np.all(x == x[0]):
        # a.e. constant: Jensen is an identity, and the mean is the constant
        return 0.0, float(x[0])
    mean = min(max(mean, float(x.min())), float(x.max()))
    e_phi = math.fsum(w * phi(x))
    phi_mean = phi(mean)
    gap = e_phi - phi_mean
    if abs(gap) <= ROUNDOFF * max(1.0, math.fsum(w * np.abs(phi(x))), abs(phi_mean)):
        gap = 0.0
    return gap, mean


def jensen_gap(mu: DiscreteMeasure, X, phi) -> float:
    """``E_mu phi(X) - phi(E_mu X)``."""
    phi = as_expr(phi)
    w, x = _support_values(mu.as_array(), _aligned_values(mu, X))
    _check_range(phi, x)
    return _raw_gap(w, x, phi)[0]


def _gate(phi: FuncExpr, x: np.ndarray, want: str, grid: int):
    report = classify_on_points(phi, x, grid)
    if report is None:
        return None
    if want == "convex" and not report.is_convex:
        raise NotConvex(f"{phi} is {report.classification} on [{x.min()}, {x.max()}], not convex")
    if want == "concave" and not report.is_concave:
        raise NotConcave(f"{phi} is {report.classification} on [{x.min()}, {x.max()}], not concave")
    if want == "strict" and not report.is_strictly_convex:
        raise NotStrictlyConvex(f"{phi} is {report.classification} on [{x.min()}, {x.max()}]")
    return report


def _prepare(P: DiscreteMeasure, Q: DiscreteMeasure, X, phi):
    profile = density_ratio(P, Q)
    p, q = aligned_weights(P, Q)
    x = np.asarray(_aligned_values(P, X), dtype=float)
    on_q = q > 0.0
    _check_range(phi, x[on_q])
    return profile, p, q, x, on_q


def _report(profile: RatioProfile, gap_p, gap_q, mean_p, mean_q, orientation, notes=()) -> GapBoundReport:
    upper = times(profile.ess_sup, gap_q)
    lower = times(profile.ess_inf, gap_q)
    notes = list(notes)
    inverse = None
    if profile.ess_inf > 0.0:
        inverse = profile.inverse_ess_sup
        notes.append(f"Q << P with ||dQ/dP||_inf = {inverse!r}")
    else:
        notes.append("ess inf dP/dQ = 0: the lower bound reduces to plain Jensen")
    return GapBoundReport(
        gap_P=gap_p,
        gap_Q=gap_q,
        ess_sup=profile.ess_sup,
        ess_inf=profile.ess_inf,
        upper_bound=upper,
        lower_bound=lower,
        upper_slack=upper - gap_p,
        lower_slack=gap_p - lower,
        orientation=orientation,
        mean_P=mean_p,
        mean_Q=mean_q,
        inverse_ess_sup=inverse,
        notes=tuple(notes),
    )


def _bounds(P, Q, X, phi, grid, orientation="convex") -> GapBoundReport:
    phi = as_expr(phi)
    profile, p, q, x, on_q = _prepare(P, Q, X, phi)
    _gate(phi, x[on_q], "convex", grid)
    gap_q, mean_q = _raw_gap(q[on_q], x[on_q], phi)
    on_p = p > 0.0
    gap_p, mean_p = _raw_gap(p[on_p], x[on_p], phi)
    return _report(profile, gap_p, gap_q, mean_p, mean_q, orientation)


def _assert_upper(report: GapBoundReport):
    if report.upper_slack < -tolerance(report.gap_P, report.upper_bound):
        raise TheoremViolation(
            f"upper bound violated: gap_P={report.gap_P!r} > {report.upper_bound!r}"
        )


def _assert_lower(report: GapBoundReport):
    if report.lower_slack < -tolerance(report.gap_P, report.lower_bound):
        raise TheoremViolation(
            f"lower bound violated: gap_P={report.gap_P!r} < {report.lower_bound!r}"
        )


def dragomir_upper(P: DiscreteMeasure, Q: DiscreteMeasure, X, phi, grid: int = 64) -> GapBoundReport:
    """Both gaps and bounds; raises TheoremViolation if the upper bound fails."""
    report = _bounds(P, Q, X, phi, grid)
    _assert_upper(report)
    return report


def dragomir_lower(P: DiscreteMeasure, Q: DiscreteMeasure, X, phi, grid: int = 64) -> GapBoundReport:
    report = _bounds(P, Q, X, phi, grid)
    _assert_lower(report)
    return report


def dragomir_bounds(P, Q, X, phi, grid: int = 64) -> GapBoundReport:
    report = _bounds(P, Q, X, phi, grid)
    _assert_upper(report)
    _assert_lower(report)
    return report


def concave_bounds(P: DiscreteMeasure, Q: DiscreteMeasure, X, phi_concave, grid: int = 64) -> GapBoundReport:
    """Bounds on ``phi(E X) - E phi(X)`` for concave phi, via -phi."""
    phi = as_expr(phi_concave)
    profile, p, q, x, on_q = _prepare(P, Q, X, phi)
    _gate(phi, x[on_q], "concave", grid)
    out = _bounds(P, Q, X, -phi, grid, orientation="concave")
    _assert_upper(out)
    _assert_lower(out)
    return out


def amgm_bounds(P: DiscreteMeasure, Q: DiscreteMeasure, X) -> GapBoundReport:
    """Arithmetic minus geometric mean under P and Q, with the ratio bounds."""
    profile = density_ratio(P, Q)
    p, q = aligned_weights(P, Q)
    x = np.asarray(_aligned_values(P, X), dtype=float)
    on_q = q > 0.0
    bad = [a for a, v, s in zip(P.atoms, x, on_q) if s and not v > 0.0]
    if bad:
        raise NonpositiveValue(f"X must be positive on the support; atoms {bad} are not")

    def amgm(w, v):
        am = math.fsum(w * v)
        if np.all(v == v[0]):
            return 0.0, am
        gm = math.exp(math.fsum(w * np.log(v)))
        gap = am - gm
        if abs(gap) <= ROUNDOFF * max(1.0, am):
            gap = 0.0
        return gap, am

    gap_q, mean_q = amgm(q[on_q], x[on_q])
    on_p = p > 0.0
    gap_p, mean_p = amgm(p[on_p], x[on_p])
    report = _report(profile, gap_p, gap_q, mean_p, mean_q, "amgm")
    _assert_upper(report)
    _assert_lower(report)
    return report


# ---------------------------------------------------------------------------
# equality cases


def measures_equal(P: DiscreteMeasure, Q: DiscreteMeasure) -> bool:
    p, q = aligned_weights(P, Q)
    return bool(np.all(np.abs(p - q) <= MEASURE_EQ_TOL))


def classify_equality(P: DiscreteMeasure, Q: DiscreteMeasure, X, phi, grid: int = 64) -> EqualityDiagnosis:
    """Decide which equality case of the upper bound this instance is in.

    Case 1 (both sides infinite) cannot happen for finite discrete measures;
    see :func:`jensengap.quad.remark2_instance` for the divergent setting.
    """
    phi = as_expr(phi)
    profile, p, q, x, on_q = _prepare(P, Q, X, phi)
    _gate(phi, x[on_q], "strict", grid)
    report = _bounds(P, Q, X, phi, grid)
    _assert_upper(report)
    tol = tolerance(report.gap_P, report.upper_bound)
    numeric_equal = abs(report.gap_P - report.upper_bound) <= tol

    xq = x[on_q]
    x_scale = max(1.0, float(np.max(np.abs(xq))))
    x_tol = TOL * x_scale
    constant = bool(np.ptp(xq) <= x_tol)
    A = sorted(profile.max_set, key=P.atoms.index)
    evidence = {"A": A, "ess_sup": profile.ess_sup, "gap_P": report.gap_P, "upper_bound": report.upper_bound}

    if measures_equal(P, Q) or set(A) == set(profile.q_support):
        # dP/dQ == 1 a.e.: both sides agree for trivial reasons
        case = CASE2 if constant else TRIVIAL
        return EqualityDiagnosis(case, report.gap_P, True, False, False, numeric_equal, evidence)

    cond_a = math.isfinite(profile.ess_sup) and math.isfinite(report.gap_Q)
    if constant:
        if report.gap_Q != 0.0 or not numeric_equal:
            raise ClassifierContradiction(
                f"X is Q-a.e. constant but gap_Q={report.gap_Q!r}, gap_P={report.gap_P!r}"
            )
        evidence["c"] = float(xq[0])
        return EqualityDiagnosis(CASE2, 0.0, cond_a, False, False, True, evidence)

    in_a = np.array([a in profile.max_set for a in P.atoms])
    off_a = on_q & ~in_a
    x_off = x[off_a]
    c = math.fsum(q[off_a] * x_off) / math.fsum(q[off_a])
    cond_b = bool(np.all(np.abs(x_off - c) <= x_tol)) and not constant
    evidence["c"] = c

    qa = math.fsum(q[in_a])
    pa = math.fsum(p[in_a])
    means = {
        "mean_Q": report.mean_Q,
        "mean_Q_on_A": math.fsum(q[in_a] * x[in_a]) / qa if qa > 0 else math.nan,
        "mean_P": report.mean_P,
        "mean_P_on_A": math.fsum(p[in_a] * x[in_a]) / pa if pa > 0 else math.nan,
    }
    evidence.update(means)
    evidence["Q(A)"] = qa
    evidence["P(A)"] = pa
    cond_c = qa > 0 and pa > 0 and all(abs(m - c) <= x_tol for m in means.values())

    conditions = cond_a and cond_b and cond_c
    if conditions != numeric_equal:
        raise ClassifierContradiction(
            f"conditions a/b/c = {cond_a}/{cond_b}/{cond_c} but numeric equality is {numeric_equal} "
            f"(gap_P={report.gap_P!r}, bound={report.upper_bound!r})"
        )
    if conditions:
        return EqualityDiagnosis(CASE3, report.gap_P, cond_a, cond_b, cond_c, True, evidence)
    return EqualityDiagnosis(STRICT, None, cond_a, cond_b, cond_c, False, evidence)


def equality_transfer_check(Q: DiscreteMeasure, P: DiscreteMeasure, X, phi, grid: int = 64) -> bool:
    """If phi(E_Q X) = E_Q phi(X) then the same holds under every P << Q.

    Returns True; a failing instance raises TheoremViolation instead of
    returning False.
    """
    report = _bounds(P, Q, X, as_expr(phi), grid)
    if report.gap_Q == 0.0 and abs(report.gap_P) > tolerance(report.gap_P):
        raise TheoremViolation(
            f"gap_Q = 0 but gap_P = {report.gap_P!r}: equality did not transfer from Q to P"
        )
    return True


def conditional_variance_bound(P: DiscreteMeasure, A, X) -> tuple[float, float, float]:
    """(Var of X under P(.|A), Var of X under P, Var/P(A))."""
    A = set(A)
    PA = condition(P, A)
    square = parse_expr("t^2")
    var_a = jensen_gap(PA, X, square)
    var = jensen_gap(P, X, square)
    bound = var / P.mass(A)
    if var_a > bound + tolerance(var_a, bound):
        raise TheoremViolation(f"conditional variance {var_a!r} exceeds Var/P(A) = {bound!r}")
    return var_a, var, bound
