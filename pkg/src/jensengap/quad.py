"""Continuous measures on intervals.

Adaptive Gauss-Kronrod (7/15) quadrature with honest non-convergence
reporting, probability densities, the Gaussian change of measure, and the
two continuous counterexamples (an absolutely-continuous-only-off-a-null-set
pair, and the family showing that no finite L^p norm of dP/dQ can replace the
essential supremum).
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .errors import DomainError, InvalidSigmaOrder, NonConvergence, TheoremViolation, ValidationError
from .funcspace import FuncExpr, Interval, as_expr, parse_expr
from .gap import ROUNDOFF, times

# Kronrod 15-point nodes on [-1, 1] (non-negative half) with Kronrod weights;
# every odd-indexed node is also a 7-point Gauss node.
_XK = np.array([
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
])
_WK = np.array([
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XK[:-1], _XK[::-1]])
_KW = np.concatenate([_WK[:-1], _WK[::-1]])
_GW = np.zeros(15)
_GW[[1, 3, 5]] = _WG[:3]
_GW[[13, 11, 9]] = _WG[:3]
_GW[7] = _WG[3]

MAX_PANELS = 2**16
DEFAULT_TOL = 1e-10
# cutoffs (as fractions of the interval length) used to probe endpoint growth
TREND_CUTOFFS = (1e-3, 1e-6, 1e-9)


@dataclass(frozen=True)
class QuadResult:
    value: float
    abs_error_estimate: float
    converged: bool
    subdivisions: int


def _panel(f: Callable, a: float, b: float) -> tuple[float, float]:
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    with np.errstate(all="ignore"):
        fx = np.asarray(f(mid + half * _NODES), dtype=float)
    if fx.shape != (15,):
        fx = np.broadcast_to(fx, (15,))
    if not np.all(np.isfinite(fx)):
        raise DomainError(f"integrand is not finite on [{a!r}, {b!r}]")
    k = half * float(_KW @ fx)
    g = half * float(_GW @ fx)
    return k, abs(k - g)


def _adaptive(f, pieces, tol, max_panels):
    heap = []
    for a, b in pieces:
        k, e = _panel(f, a, b)
        heap.append((-e, a, b, k))
    heapq.heapify(heap)
    total_err = math.fsum(-h[0] for h in heap)
    stuck = False
    while total_err > tol and len(heap) < max_panels:
        neg_e, a, b, k = heapq.heappop(heap)
        m = 0.5 * (a + b)
        if not a < m < b or (b - a) < 1e-300:
            heapq.heappush(heap, (neg_e, a, b, k))
            stuck = True
            break
        try:
            k1, e1 = _panel(f, a, m)
            k2, e2 = _panel(f, m, b)
        except DomainError:
            # overflow this close to a singular endpoint; stop refining
            heapq.heappush(heap, (neg_e, a, b, k))
            stuck = True
            break
        heapq.heappush(heap, (-e1, a, m, k1))
        heapq.heappush(heap, (-e2, m, b, k2))
        total_err += e1 + e2 + neg_e
        if total_err <= tol:
            # running sum may drift; confirm before stopping
            total_err = math.fsum(-h[0] for h in heap)
    total_err = math.fsum(-h[0] for h in heap)
    # deterministic reduction order: left to right
    value = math.fsum(k for _, _, k in sorted((a, b, k) for _, a, b, k in heap))
    worst = min(heap)
    return value, total_err, len(heap), (worst[1], worst[2]), stuck


def _pieces(interval: Interval, breakpoints: Sequence[float]) -> list[tuple[float, float]]:
    pts = sorted({interval.lo, interval.hi, *(b for b in breakpoints if interval.lo < b < interval.hi)})
    return list(zip(pts[:-1], pts[1:]))


def integrate(f, interval, tol: float = DEFAULT_TOL, breakpoints: Sequence[float] = (),
              max_panels: int = MAX_PANELS) -> QuadResult:
    """Adaptive 7/15-point Gauss-Kronrod quadrature of ``f`` over ``interval``.

    Endpoints are never evaluated, so integrable endpoint singularities are
    fine. If the error target is not met, :class:`NonConvergence` is raised
    with the partial value and, when the trouble sits at an endpoint, the
    values of the integral cut off at geometrically shrinking distances from
    that endpoint.
    """
    interval = Interval.coerce(interval)
    if not interval.bounded:
        raise ValidationError("integrate needs a bounded interval")
    if tol < 1e-12:
        raise ValidationError(f"tol must be at least 1e-12, got {tol}")
    if interval.lo == interval.hi:
        return QuadResult(0.0, 0.0, True, 0)
    value, err, n, worst, _ = _adaptive(f, _pieces(interval, breakpoints), tol, max_panels)
    if err <= tol:
        return QuadResult(value, err, True, n)

    lo, hi = interval.lo, interval.hi
    side = None
    if worst[0] == lo:
        side = "lo"
    elif worst[1] == hi:
        side = "hi"
    trend, divergent = [], False
    if side is not None:
        try:
            trend = cutoff_trend(f, interval, TREND_CUTOFFS, side, tol, breakpoints)
            divergent = trend_diverges([v for _, v in trend])
        except NonConvergence:
            trend = []
    raise NonConvergence(
        f"quadrature on {interval} stopped at error {err:.3g} > {tol:.3g} after {n} panels"
        + (f"; diverges at the {side} endpoint" if divergent else ""),
        partial=value,
        abs_error=err,
        trend=trend,
        divergent=divergent,
    )


def cutoff_trend(f, interval, cutoffs: Sequence[float] = TREND_CUTOFFS, side: str = "lo",
                 tol: float = DEFAULT_TOL, breakpoints: Sequence[float] = ()) -> list[tuple[float, float]]:
    """Integral of ``f`` with ``cutoff * length`` removed at one endpoint, per cutoff."""
    interval = Interval.coerce(interval)
    length = interval.hi - interval.lo
    out = []
    for eps in cutoffs:
        if side == "lo":
            sub = Interval.closed(interval.lo + eps * length, interval.hi)
        else:
            sub = Interval.closed(interval.lo, interval.hi - eps * length)
        res = integrate(f, sub, tol, breakpoints)
        out.append((float(eps), res.value))
    return out


def trend_diverges(values: Sequence[float], ratio: float = 0.5) -> bool:
    """Heuristic: successive increments fail to shrink geometrically.

    For cutoffs a fixed factor apart, a convergent tail gives increments
    that shrink by a constant factor; a logarithmic or power divergence
    gives increments that stay level or grow.
    """
    if len(values) < 3:
        return False
    inc = np.diff(values)
    scale = max(1.0, float(np.max(np.abs(values))))
    if abs(inc[-1]) <= 1e-9 * scale:
        return False
    return bool(abs(inc[-1]) >= ratio * abs(inc[-2]) and np.sign(inc[-1]) == np.sign(inc[-2]))


# ---------------------------------------------------------------------------
# densities


@dataclass(frozen=True)
class Density:
    """Probability density ``expr`` on a bounded ``support``."""

    expr: FuncExpr
    support: Interval
    normalization_check: float
    breakpoints: tuple = ()
    label: str = ""

    def __call__(self, t):
        return self.expr(t)


NORMALIZATION_TOL = 1e-6
_PROBE = 257


def make_density(expr, support, breakpoints: Sequence[float] = (), label: str = "",
                 tol: float = DEFAULT_TOL) -> Density:
    expr = as_expr(expr)
    support = Interval.coerce(support)
    if not support.bounded:
        raise ValidationError("density support must be bounded")
    probe = np.linspace(support.lo, support.hi, _PROBE + 2)[1:-1]
    values = expr(probe)
    if np.any(values < 0.0):
        raise ValidationError(f"density {expr} is negative somewhere on {support}")
    norm = integrate(expr, support, tol, breakpoints).value
    if abs(norm - 1.0) > NORMALIZATION_TOL:
        raise ValidationError(f"density {expr} integrates to {norm!r} over {support}, not 1")
    return Density(expr, support, norm, tuple(breakpoints), label or str(expr))


def lebesgue(lo: float = 0.0, hi: float = 1.0) -> Density:
    return make_density(parse_expr(repr(1.0 / (hi - lo))), (lo, hi), label=f"uniform[{lo}, {hi}]")


GAUSS_TAIL = 8.0


def gaussian_pdf_expr(sigma: float, mean: float = 0.0) -> FuncExpr:
    scale = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    return parse_expr(f"{scale!r} * exp(-(t - {mean!r})^2 / {2.0 * sigma * sigma!r})")


def gaussian(mean: float, sigma: float) -> Density:
    """N(mean, sigma) truncated to mean +- 8 sigma."""
    if not sigma > 0:
        raise ValidationError(f"sigma must be positive, got {sigma}")
    lost = math.erfc(GAUSS_TAIL / math.sqrt(2.0))
    if lost >= 1e-14:  # pragma: no cover - a fixed property of GAUSS_TAIL
        raise AssertionError(f"Gaussian tail truncation loses {lost} of mass")
    support = (mean - GAUSS_TAIL * sigma, mean + GAUSS_TAIL * sigma)
    return make_density(gaussian_pdf_expr(sigma, mean), support, label=f"N({mean}, {sigma})")


# ---------------------------------------------------------------------------
# expectations and gaps


def expectation(density: Density, f, tol: float = DEFAULT_TOL, breakpoints: Sequence[float] = (),
                window=None) -> QuadResult:
    """``integral of f * density`` over the support (or over ``window``)."""
    f = f if callable(f) else as_expr(f)
    pts = tuple(density.breakpoints) + tuple(breakpoints)
    region = density.support if window is None else Interval.coerce(window)
    return integrate(lambda t: f(t) * density.expr(t), region, tol, pts)


@dataclass(frozen=True)
class ContinuousGap:
    """Jensen gap of X under a density.

    When ``divergent`` is set, E phi(X) was diagnosed infinite and ``value``
    is only the last finite truncated estimate, not a number to trust.
    """

    value: float
    divergent: bool
    mean: float
    mean_phi: float
    trend: tuple = ()


def continuous_gap(density: Density, X, phi, tol: float = DEFAULT_TOL,
                   breakpoints: Sequence[float] = ()) -> ContinuousGap:
    X, phi = as_expr(X), as_expr(phi)
    try:
        mean = expectation(density, X, tol, breakpoints).value
    except NonConvergence as exc:
        raise NonConvergence(
            f"E[X] does not converge: {exc}", exc.partial, exc.abs_error, exc.trend, exc.divergent, kind="mean"
        ) from exc
    phi_mean = phi(mean)
    composite = phi.compose(X)
    try:
        mean_phi = expectation(density, composite, tol, breakpoints).value
    except NonConvergence as exc:
        if exc.divergent and exc.trend and exc.trend[-1][1] > exc.trend[0][1]:
            return ContinuousGap(exc.partial - phi_mean, True, mean, exc.partial, tuple(exc.trend))
        raise NonConvergence(
            f"E[phi(X)] does not converge: {exc}", exc.partial, exc.abs_error, exc.trend, exc.divergent, kind="gap"
        ) from exc
    gap = mean_phi - phi_mean
    if abs(gap) <= ROUNDOFF * max(1.0, abs(mean_phi), abs(phi_mean)):
        gap = 0.0
    return ContinuousGap(gap, False, mean, mean_phi)


# ---------------------------------------------------------------------------
# Gaussian change of measure


def gaussian_ratio(sigma1: float, sigma2: float) -> tuple[FuncExpr, float]:
    """dP/dQ for P = N(0, sigma1), Q = N(0, sigma2), and its essential sup.

    The exponent is the exact quotient of the two densities,
    ``x^2 (sigma1^2 - sigma2^2) / (2 sigma1^2 sigma2^2)``; the supremum
    ``sigma2/sigma1`` is attained at 0.
    """
    if not (sigma1 > 0 and sigma2 > 0):
        raise ValidationError("sigmas must be positive")
    if sigma1 > sigma2:
        raise InvalidSigmaOrder(f"need sigma1 <= sigma2, got {sigma1} > {sigma2}")
    lead = sigma2 / sigma1
    rate = (sigma2**2 - sigma1**2) / (2.0 * sigma1**2 * sigma2**2)
    return parse_expr(f"{lead!r} * exp(-{rate!r} * t^2)"), lead


class GaussianVarianceBounds(NamedTuple):
    upper_factor: float
    lower_factor: float
    var1: float
    var2: float

    def upper_holds(self, tol: float = NORMALIZATION_TOL) -> bool:
        return self.var1 <= self.upper_factor * self.var2 + tol

    def lower_holds(self, tol: float = NORMALIZATION_TOL) -> bool:
        return self.lower_factor * self.var2 <= self.var1 + tol


def _check_support(g: FuncExpr, c: float, d: float, reach: float):
    outside = np.concatenate([
        np.linspace(-reach, c, 400, endpoint=False),
        np.linspace(d, reach, 401)[1:],
    ])
    if np.any(g(outside) != 0.0):
        raise ValidationError(f"{g} is not supported in [{c}, {d}]")


def gaussian_variance_bounds(g, sigma1: float, sigma2: float, support, tol: float = DEFAULT_TOL,
                             breakpoints: Sequence[float] = ()) -> GaussianVarianceBounds:
    """Variances of g(X) under N(0, sigma1) and N(0, sigma2) with the ratio factors.

    ``upper_factor`` is sigma2/sigma1, the global sup of dP/dQ, and the upper
    inequality is a theorem (a failure raises TheoremViolation).
    ``lower_factor`` only uses the sup of dQ/dP over the support ``[c, d]`` of
    g; that inequality is not guaranteed in general, so it is reported via
    :meth:`GaussianVarianceBounds.lower_holds` rather than enforced.
    """
    g = as_expr(g)
    c, d = (float(v) for v in support)
    if not 0 < c < d:
        raise ValidationError(f"support must satisfy 0 < c < d, got [{c}, {d}]")
    _, lead = gaussian_ratio(sigma1, sigma2)
    _check_support(g, c, d, GAUSS_TAIL * sigma2)
    variances = []
    for s in (sigma1, sigma2):
        dens = gaussian(0.0, s)
        square = g * g
        m1 = expectation(dens, g, tol, breakpoints, window=(c, d)).value
        m2 = expectation(dens, square, tol, breakpoints, window=(c, d)).value
        var = m2 - m1 * m1
        if abs(var) <= ROUNDOFF * max(1.0, m2):
            var = 0.0
        variances.append(var)
    lower = lead * math.exp(d * d * (sigma1**2 - sigma2**2) / (2.0 * sigma1**2 * sigma2**2))
    out = GaussianVarianceBounds(lead, lower, variances[0], variances[1])
    if not out.upper_holds():
        raise TheoremViolation(f"Var1 = {out.var1!r} exceeds {lead!r} * Var2 = {lead * out.var2!r}")
    return out


# ---------------------------------------------------------------------------
# counterexamples

# a step from 0 to 1 at 1/2: exact on every quadrature node once 1/2 is a breakpoint
STEP_AT_HALF = "max(0, min(1, (t - 0.5) * 1e300))"


@dataclass(frozen=True)
class Remark1Report:
    gap_P: float
    gap_Q: float
    rhs: float
    ratio_on_support_of_X: float
    absolutely_continuous: bool
    absolutely_continuous_off_zero_set: bool
    bound_holds: bool
    explanation: str


def remark1_instance(tol: float = DEFAULT_TOL) -> Remark1Report:
    """P uniform on [0,1], dQ = 2 on [1/2, 1], X the indicator of [1/2, 1], phi = t^2."""
    P = lebesgue(0.0, 1.0)
    Q = make_density(f"2 * {STEP_AT_HALF}", (0.0, 1.0), breakpoints=(0.5,), label="2*1[1/2,1]")
    X = parse_expr(STEP_AT_HALF)
    phi = parse_expr("t^2")
    gap_p = continuous_gap(P, X, phi, tol, breakpoints=(0.5,)).value
    gap_q = continuous_gap(Q, X, phi, tol, breakpoints=(0.5,)).value

    right = np.linspace(0.5, 1.0, 65)[1:]
    left = np.linspace(0.0, 0.5, 65)[:-1]
    ratios = P.expr(right) / Q.expr(right)
    ratio = float(ratios[0]) if np.ptp(ratios) == 0.0 else float("nan")
    ac_everywhere = not bool(np.any((Q.expr(left) == 0.0) & (P.expr(left) > 0.0)))
    rhs = times(ratio, gap_q)
    holds = gap_p <= rhs + 1e-9
    return Remark1Report(
        gap_P=gap_p,
        gap_Q=gap_q,
        rhs=rhs,
        ratio_on_support_of_X=ratio,
        absolutely_continuous=ac_everywhere,
        absolutely_continuous_off_zero_set=bool(np.all(np.isfinite(ratios))),
        bound_holds=holds,
        explanation=(
            "dP/dQ = 1/2 wherever X != 0, but P charges [0, 1/2) where Q vanishes, so P << Q fails "
            f"on the whole space; X is Q-a.e. constant, the right side is {rhs!r}, "
            f"while the P-gap is {gap_p!r}."
        ),
    )


@dataclass(frozen=True)
class Remark2Report:
    p: float
    eps: float
    C: float
    C_quadrature: float
    gap_P_truncated: float
    gap_Q: float
    gap_Q_quadrature: float
    mean_P: float
    lp_norm: float
    lp_norm_quadrature: float
    ratio: float
    divergent: bool
    trend: tuple = field(default=())


def remark2_instance(p: float = 1.0, eps: float = 1e-9, tol: float = DEFAULT_TOL) -> Remark2Report:
    """Q uniform on (0,1], X = t^(-1/2 + 1/(4p)), dP = C t^(-1/(2p)) dt, phi = t^2.

    ``gap_P_truncated`` integrates phi(X) against P over [eps, 1] only (the
    full integral is infinite) and subtracts phi of the full P-mean.
    """
    if not p >= 1:
        raise ValidationError(f"p must be >= 1, got {p}")
    if not 0 < eps < 1:
        raise ValidationError(f"eps must lie in (0, 1), got {eps}")
    C = (2 * p - 1) / (2 * p)
    unit = (0.0, 1.0)
    kernel = parse_expr(f"t^(-{1 / (2 * p)!r})")
    C_quad = 1.0 / integrate(kernel, unit, tol).value
    if abs(C_quad - C) > NORMALIZATION_TOL:
        raise TheoremViolation(f"normalizing constant mismatch: {C!r} vs quadrature {C_quad!r}")
    P = make_density(kernel * C, unit, label=f"{C!r} t^(-1/(2p))")
    Q = lebesgue(0.0, 1.0)
    X = parse_expr(f"t^({-0.5 + 1 / (4 * p)!r})")
    phi = parse_expr("t^2")

    gap_q_closed = 2 * p - (4 * p / (2 * p + 1)) ** 2
    gq = continuous_gap(Q, X, phi, tol)
    if gq.divergent or abs(gq.value - gap_q_closed) > NORMALIZATION_TOL:
        raise TheoremViolation(f"gap_Q quadrature {gq.value!r} disagrees with {gap_q_closed!r}")

    mean_p = expectation(P, X, tol).value
    phi_x = phi.compose(X)
    truncated = expectation(P, phi_x, tol, window=(eps, 1.0)).value
    gap_p_trunc = truncated - phi(mean_p)

    # E_P phi(X) itself: expected to diverge at 0
    divergent, trend = False, ()
    try:
        expectation(P, phi_x, tol)
    except NonConvergence as exc:
        divergent, trend = exc.divergent, tuple(exc.trend)

    lp_closed = (2.0 * C**p) ** (1.0 / p)
    lp_quad = integrate(parse_expr(f"{C**p!r} * t^(-0.5)"), unit, tol).value ** (1.0 / p)
    if abs(lp_quad - lp_closed) > NORMALIZATION_TOL:
        raise TheoremViolation(f"L^p norm mismatch: {lp_closed!r} vs quadrature {lp_quad!r}")

    return Remark2Report(
        p=p,
        eps=eps,
        C=C,
        C_quadrature=C_quad,
        gap_P_truncated=gap_p_trunc,
        gap_Q=gap_q_closed,
        gap_Q_quadrature=gq.value,
        mean_P=mean_p,
        lp_norm=lp_closed,
        lp_norm_quadrature=lp_quad,
        ratio=gap_p_trunc / (lp_closed * gap_q_closed),
        divergent=divergent,
        trend=trend,
    )


# ---------------------------------------------------------------------------
# two-sided bounds for continuous pairs

_RATIO_GRID = 4097
_APPROACH = (1e-3, 1e-6, 1e-9, 1e-12)


@dataclass(frozen=True)
class RatioEstimate:
    ess_sup: float
    ess_inf: float
    exact: bool
    note: str


def _interior_points(support: Interval, breakpoints=()) -> np.ndarray:
    lo, hi = support.lo, support.hi
    length = hi - lo
    grid = np.linspace(lo, hi, _RATIO_GRID)[1:-1]
    near = [lo + d * length for d in _APPROACH] + [hi - d * length for d in _APPROACH]
    extra = []
    for b in breakpoints:
        extra += [b - 1e-9 * length, b + 1e-9 * length]
    pts = np.concatenate([grid, near, extra])
    return np.unique(pts[(pts > lo) & (pts < hi)])


def estimate_ratio(P: Density, Q: Density) -> RatioEstimate:
    """ess sup / ess inf of dP/dQ, closed form for centred Gaussians, else probed.

    Raises AbsoluteContinuityViolated if P has density where Q has none.
    """
    from .errors import AbsoluteContinuityViolated

    gp, gq = P.label.startswith("N("), Q.label.startswith("N(")
    if gp and gq:
        mp, sp = (float(v) for v in P.label[2:-1].split(","))
        mq, sq = (float(v) for v in Q.label[2:-1].split(","))
        if mp == mq and sp == sq:
            return RatioEstimate(1.0, 1.0, True, "P = Q")
        if mp == mq and sp < sq:
            return RatioEstimate(sq / sp, 0.0, True, "centred Gaussians: sup at the mean, inf in the tails")
    pts = _interior_points(Q.support, Q.breakpoints + P.breakpoints)
    outside = np.concatenate([
        np.linspace(P.support.lo, P.support.hi, 1025)[1:-1],
    ])
    outside = outside[(outside <= Q.support.lo) | (outside >= Q.support.hi)]
    if outside.size and np.any(P.expr(outside) > 0.0):
        raise AbsoluteContinuityViolated([f"P has density outside the support {Q.support} of Q"])
    in_p = (pts > P.support.lo) & (pts < P.support.hi)
    p = np.where(in_p, P.expr(np.where(in_p, pts, P.support.lo + 0.5 * (P.support.hi - P.support.lo))), 0.0)
    q = Q.expr(pts)
    bad = (q == 0.0) & (p > 0.0)
    if np.any(bad):
        raise AbsoluteContinuityViolated([f"t={float(t)!r}" for t in pts[bad][:5]])
    on_q = q > 0.0
    r = p[on_q] / q[on_q]
    sup, inf = float(r.max()), float(r.min())
    note = "estimated on a probe grid"
    # growth toward an endpoint: sampled ratios keep climbing as the distance shrinks
    length = Q.support.hi - Q.support.lo
    for sign, base in ((1, Q.support.lo), (-1, Q.support.hi)):
        near = np.array([base + sign * d * length for d in _APPROACH])
        qn = Q.expr(near)
        inside = (near > P.support.lo) & (near < P.support.hi)
        if not np.all(qn > 0.0) or not inside.all():
            continue
        rn = P.expr(near) / qn
        if np.all(np.diff(rn) > 0.0) and rn[-1] > 10.0 * rn[0]:
            sup = math.inf
            note = "dP/dQ grows without bound toward an endpoint"
    return RatioEstimate(sup, inf, False, note)


def continuous_bounds(P: Density, Q: Density, X, phi, tol: float = DEFAULT_TOL,
                      breakpoints: Sequence[float] = ()):
    """Gap report for a pair of densities; divergent gaps are flagged, not faked."""
    from .gap import GapBoundReport

    X, phi = as_expr(X), as_expr(phi)
    ratio = estimate_ratio(P, Q)
    gp = continuous_gap(P, X, phi, tol, breakpoints)
    gq = continuous_gap(Q, X, phi, tol, breakpoints)
    upper = times(ratio.ess_sup, gq.value) if not gq.divergent else math.inf
    lower = times(ratio.ess_inf, gq.value) if not gq.divergent else math.nan
    notes = [f"essential bounds: {ratio.note}"]
    if gp.divergent:
        notes.append("E_P phi(X) diverges; gap_P is a truncated estimate")
    if gq.divergent:
        notes.append("E_Q phi(X) diverges; gap_Q is a truncated estimate")
    return GapBoundReport(
        gap_P=gp.value,
        gap_Q=gq.value,
        ess_sup=ratio.ess_sup,
        ess_inf=ratio.ess_inf,
        upper_bound=upper,
        lower_bound=lower,
        upper_slack=upper - gp.value if not gp.divergent else -math.inf if math.isfinite(upper) else math.nan,
        lower_slack=gp.value - lower if not gp.divergent else math.inf,
        gap_P_finite=not gp.divergent,
        gap_Q_finite=not gq.divergent,
        mean_P=gp.mean,
        mean_Q=gq.mean,
        inverse_ess_sup=1.0 / ratio.ess_inf if ratio.ess_inf > 0 else None,
        notes=tuple(notes),
    )
