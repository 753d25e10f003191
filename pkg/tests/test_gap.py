import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from jensengap.errors import (
    NonpositiveValue,
    NotConcave,
    NotConvex,
    NotStrictlyConvex,
    RangeNotContained,
)
from jensengap.funcspace import Interval, parse_expr
from jensengap.gap import (
    CASE2,
    CASE3,
    STRICT,
    TRIVIAL,
    amgm_bounds,
    classify_equality,
    concave_bounds,
    conditional_variance_bound,
    dragomir_bounds,
    dragomir_lower,
    dragomir_upper,
    equality_transfer_check,
    jensen_gap,
    times,
)
from jensengap.measure import DiscreteMeasure

SQ = parse_expr("t^2")
P3 = DiscreteMeasure.from_weights([0.4, 0.4, 0.2])
Q3 = DiscreteMeasure.from_weights([0.25, 0.25, 0.5])
X3 = [1.0, -1.0, 0.0]


def variance(w, x):
    # plain two-pass variance as the oracle for phi = t^2
    w, x = np.asarray(w, float), np.asarray(x, float)
    m = float(np.dot(w, x))
    return float(np.dot(w, (x - m) ** 2))


def test_times_convention():
    assert times(math.inf, 0.0) == 0.0
    assert times(math.inf, 1.0) == math.inf
    assert times(2.0, 3.0) == 6.0


def test_gap_is_variance_for_square():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n = int(rng.integers(2, 9))
        w = rng.dirichlet(np.ones(n))
        mu = DiscreteMeasure.from_weights(w / math.fsum(w))
        x = rng.uniform(-10, 10, n)
        assert jensen_gap(mu, x, SQ) == pytest.approx(variance(mu.weights, x), rel=1e-10, abs=1e-12)


def test_case3_example():
    rep = dragomir_bounds(P3, Q3, X3, SQ)
    assert rep.gap_P == pytest.approx(0.8, abs=1e-12)
    assert rep.gap_Q == pytest.approx(0.5, abs=1e-12)
    assert rep.upper_bound == pytest.approx(0.8, abs=1e-12)
    assert rep.lower_bound == pytest.approx(0.2, abs=1e-12)
    assert rep.sandwich_holds
    diag = classify_equality(P3, Q3, X3, SQ)
    assert diag.case == CASE3
    assert diag.cond_a and diag.cond_b and diag.cond_c
    assert diag.evidence["c"] == 0.0
    assert diag.shared_value == pytest.approx(0.8, abs=1e-12)


def test_upper_example_strict():
    P = DiscreteMeasure.from_weights([0.6, 0.4])
    Q = DiscreteMeasure.from_weights([0.5, 0.5])
    X = [0.0, 3.0]
    rep = dragomir_upper(P, Q, X, SQ)
    assert rep.gap_P == pytest.approx(variance(P.weights, X), abs=1e-12)
    assert rep.gap_Q == pytest.approx(2.25, abs=1e-12)
    assert rep.upper_bound == pytest.approx(1.2 * 2.25, abs=1e-12)
    assert classify_equality(P, Q, X, SQ).case == STRICT
    dragomir_lower(P, Q, X, SQ)


def test_equal_measures():
    rep = dragomir_bounds(Q3, Q3, X3, SQ)
    assert rep.ess_sup == rep.ess_inf == 1.0
    assert rep.gap_P == rep.gap_Q
    assert classify_equality(Q3, Q3, X3, SQ).case == TRIVIAL


def test_constant_x_is_case2():
    diag = classify_equality(P3, Q3, [2.0, 2.0, 2.0], SQ)
    assert diag.case == CASE2 and diag.shared_value == 0.0


def test_abs_is_not_strictly_convex():
    with pytest.raises(NotStrictlyConvex):
        classify_equality(P3, Q3, X3, parse_expr("abs(t)"))


def test_not_convex_gate():
    with pytest.raises(NotConvex):
        dragomir_bounds(P3, Q3, X3, parse_expr("t^3"))
    with pytest.raises(NotConcave):
        concave_bounds(P3, Q3, X3, SQ)


def test_range_not_contained():
    phi = parse_expr("-log(t)", domain=Interval(0.0, math.inf))
    with pytest.raises(RangeNotContained):
        dragomir_bounds(P3, Q3, X3, phi)


def test_concave_bounds_mirror_convex():
    X = [1.0, 4.0, 9.0]
    rep = concave_bounds(P3, Q3, X, parse_expr("log(t)"))
    mirror = dragomir_bounds(P3, Q3, X, parse_expr("-log(t)"))
    assert rep.orientation == "concave"
    assert rep.gap_P == pytest.approx(mirror.gap_P, abs=1e-15)
    assert rep.upper_bound == pytest.approx(mirror.upper_bound, abs=1e-15)


def test_amgm():
    P = DiscreteMeasure.from_weights([0.5, 0.5])
    rep = amgm_bounds(P, P, [1.0, 4.0])
    # AM 2.5, GM 2
    assert rep.gap_P == pytest.approx(0.5, abs=1e-12)
    with pytest.raises(NonpositiveValue):
        amgm_bounds(P, P, [0.0, 1.0])


def test_conditional_variance_example():
    P = DiscreteMeasure.from_weights([0.25, 0.25, 0.5])
    var_a, var, bound = conditional_variance_bound(P, {"w1", "w2"}, X3)
    assert var_a == pytest.approx(1.0, abs=1e-12)
    assert var == pytest.approx(0.5, abs=1e-12)
    assert bound == pytest.approx(1.0, abs=1e-12)


def test_transfer_on_affine_piece():
    phi = parse_expr("max(t, 0)")
    assert equality_transfer_check(Q3, P3, [1.0, 2.0, 5.0], phi)


weights = st.lists(st.floats(0.01, 1.0), min_size=2, max_size=6)


@settings(max_examples=200, deadline=None)
@given(weights, st.data())
def test_scale_covariance(wq, data):
    n = len(wq)
    wp = data.draw(st.lists(st.floats(0.0, 1.0), min_size=n, max_size=n).filter(lambda v: sum(v) > 0.05))
    x = data.draw(st.lists(st.floats(-5, 5), min_size=n, max_size=n))
    c = data.draw(st.floats(0.1, 10.0))
    Q = DiscreteMeasure.from_weights(np.asarray(wq) / math.fsum(wq))
    P = DiscreteMeasure.from_weights(np.asarray(wp) / math.fsum(wp))
    try:
        base = dragomir_bounds(P, Q, x, SQ)
    except ValueError:
        # rounding put the sum outside tolerance; not what is under test
        return
    scaled = dragomir_bounds(P, Q, [c * v for v in x], SQ)
    assert scaled.gap_P == pytest.approx(c * c * base.gap_P, rel=1e-9, abs=1e-12)
    assert scaled.upper_bound == pytest.approx(c * c * base.upper_bound, rel=1e-9, abs=1e-12)


def test_conditioning_consistency():
    # P restricted to the maximizing set is a conditioning of Q there
    rng = np.random.default_rng(11)
    for _ in range(50):
        q = rng.dirichlet(np.ones(5))
        q = q / math.fsum(q)
        Q = DiscreteMeasure.from_weights(q)
        A = {"w1", "w2"}
        P = DiscreteMeasure.from_weights([q[0] / (q[0] + q[1]), q[1] / (q[0] + q[1]), 0, 0, 0])
        x = rng.uniform(-3, 3, 5)
        rep = dragomir_bounds(P, Q, x, SQ)
        assert rep.ess_sup == pytest.approx(1.0 / Q.mass(A))
        assert rep.gap_P <= rep.upper_bound + 1e-12
