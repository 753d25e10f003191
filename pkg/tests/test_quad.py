import math

import numpy as np
import pytest

from jensengap.errors import InvalidSigmaOrder, NonConvergence, ValidationError
from jensengap.funcspace import parse_expr
from jensengap.gap import jensen_gap
from jensengap.measure import DiscreteMeasure
from jensengap.quad import (
    continuous_bounds,
    continuous_gap,
    expectation,
    gaussian,
    gaussian_pdf_expr,
    gaussian_ratio,
    gaussian_variance_bounds,
    integrate,
    lebesgue,
    make_density,
    remark1_instance,
    remark2_instance,
)

HAT = "max(0, 1 - abs(2*t - 3))"


def normal_pdf(x, s):
    return math.exp(-x * x / (2 * s * s)) / (s * math.sqrt(2 * math.pi))


@pytest.mark.parametrize(
    "text, interval, exact",
    [
        ("exp(t)", (0, 1), math.e - 1),
        ("t^2", (-1, 2), 3.0),
        ("t^(-0.5)", (0, 1), 2.0),
        ("log(t)", (0, 1), -1.0),
        ("1/(1 + t^2)", (0, 1), math.pi / 4),
    ],
)
def test_integrate_closed_forms(text, interval, exact):
    res = integrate(parse_expr(text), interval, tol=1e-10)
    assert res.converged
    assert res.value == pytest.approx(exact, abs=1e-9)


def test_integrate_breakpoint_kink():
    res = integrate(parse_expr("abs(t - 0.3)"), (0, 1), breakpoints=(0.3,))
    assert res.value == pytest.approx(0.5 * (0.09 + 0.49), abs=1e-13)


def test_divergence_reported_not_faked():
    with pytest.raises(NonConvergence) as err:
        integrate(parse_expr("1/t"), (0, 1))
    assert err.value.divergent
    values = [v for _, v in err.value.trend]
    assert values == sorted(values)
    assert math.isfinite(err.value.partial)


def test_integrate_rejects_tiny_tol():
    with pytest.raises(ValidationError):
        integrate(parse_expr("t"), (0, 1), tol=1e-14)


def test_gaussian_pdf_matches_math():
    for s in (0.5, 1.0, 1.5):
        f = gaussian_pdf_expr(s)
        for x in np.linspace(-3, 3, 13):
            assert f(x) == pytest.approx(normal_pdf(x, s), rel=1e-14)


def test_gaussian_moments():
    d = gaussian(0.0, 1.5)
    assert d.normalization_check == pytest.approx(1.0, abs=1e-12)
    assert expectation(d, "t^2").value == pytest.approx(2.25, abs=1e-10)


def test_make_density_checks():
    with pytest.raises(ValidationError):
        make_density("2*t", (0, 2))
    with pytest.raises(ValidationError):
        make_density("t - 0.5", (-0.5, 1.5))


def test_continuous_gap_uniform_variance():
    g = continuous_gap(lebesgue(0, 1), "t", "t^2")
    assert g.value == pytest.approx(1 / 12, abs=1e-12)
    assert not g.divergent


@pytest.mark.parametrize("phi", ["t^2", "exp(t)"])
def test_discretization_converges_to_quadrature(phi):
    # midpoint-rule discrete measures approximating N(0, 1): gap error shrinks with n
    exact = continuous_gap(gaussian(0, 1), "t", phi).value
    errors = []
    for n in (64, 256, 1024):
        edges = np.linspace(-8, 8, n + 1)
        mids = 0.5 * (edges[1:] + edges[:-1])
        w = np.array([normal_pdf(x, 1.0) for x in mids])
        mu = DiscreteMeasure.from_weights(w / math.fsum(w))
        errors.append(abs(jensen_gap(mu, mids, parse_expr(phi)) - exact))
    assert errors[0] > errors[1] > errors[2]
    assert errors[2] < 1e-4


def test_gaussian_ratio_identity():
    ratio, lead = gaussian_ratio(1.0, 1.5)
    assert lead == 1.5
    for x in np.linspace(-4, 4, 101):
        assert ratio(x) * normal_pdf(x, 1.5) == pytest.approx(normal_pdf(x, 1.0), abs=1e-12)
    with pytest.raises(InvalidSigmaOrder):
        gaussian_ratio(2.0, 1.0)


def test_gaussian_hat_variance_bounds():
    out = gaussian_variance_bounds(parse_expr(HAT), 1.0, 1.5, (1.0, 2.0), breakpoints=(1.0, 1.5, 2.0))
    assert out.upper_factor == 1.5
    assert out.lower_factor == pytest.approx(1.5 * math.exp(-4 * 1.25 / 4.5), rel=1e-14)
    assert out.upper_holds() and out.lower_holds()


def test_compact_lower_factor_can_fail():
    # indicator-like g near the origin: the lower inequality is not a theorem
    g = parse_expr("max(0, min(1, (t - 0.01) * 1e300)) * max(0, min(1, (0.51 - t) * 1e300))")
    out = gaussian_variance_bounds(g, 1.0, 1.5, (0.01, 0.51), breakpoints=(0.01, 0.51))
    assert out.upper_holds()
    assert not out.lower_holds(tol=0.0)


def test_pair_without_absolute_continuity():
    rep = remark1_instance()
    assert rep.gap_P == pytest.approx(0.25, abs=1e-9)
    assert rep.gap_Q == 0.0
    assert not rep.absolutely_continuous and not rep.bound_holds


def test_unbounded_ratio_family_constants():
    r1 = remark2_instance(1.0)
    assert r1.C == 0.5 and r1.gap_Q == pytest.approx(2 / 9, abs=1e-12)
    assert r1.divergent
    r2 = remark2_instance(2.0)
    assert r2.C == 0.75 and math.isfinite(r2.gap_Q) and r2.divergent
    with pytest.raises(ValidationError):
        remark2_instance(0.5)
    with pytest.raises(ValidationError):
        remark2_instance(1.0, eps=1.5)


def test_continuous_bounds_gaussians():
    rep = continuous_bounds(gaussian(0, 1), gaussian(0, 1.5), "t", "t^2")
    assert rep.ess_sup == 1.5 and rep.ess_inf == 0.0
    assert rep.gap_P == pytest.approx(1.0, abs=1e-9)
    assert rep.gap_Q == pytest.approx(2.25, abs=1e-9)
    assert rep.gap_P <= rep.upper_bound


def test_continuous_bounds_unbounded_ratio():
    P = make_density("0.5*t^(-0.5)", (0, 1))
    rep = continuous_bounds(P, lebesgue(0, 1), "t^(-0.25)", "t^2")
    assert rep.ess_sup == math.inf
    assert not rep.gap_P_finite and rep.gap_Q_finite
