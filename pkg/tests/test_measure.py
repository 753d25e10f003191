import math

import numpy as np
import pytest

from jensengap.errors import AbsoluteContinuityViolated, EmptyConditioningEvent, ValidationError
from jensengap.measure import (
    DiscreteMeasure,
    condition,
    density_ratio,
    normalized_truncation,
    tilt,
    truncate,
)

P3 = DiscreteMeasure(["a", "b", "c"], [0.4, 0.4, 0.2])
Q3 = DiscreteMeasure(["a", "b", "c"], [0.25, 0.25, 0.5])


def test_weights_must_sum_to_one():
    with pytest.raises(ValidationError, match="weights"):
        DiscreteMeasure(["a", "b"], [0.5, 0.4])


def test_negative_and_duplicate_rejected():
    with pytest.raises(ValidationError):
        DiscreteMeasure(["a", "b"], [1.5, -0.5])
    with pytest.raises(ValidationError):
        DiscreteMeasure(["a", "a"], [0.5, 0.5])
    with pytest.raises(ValidationError):
        DiscreteMeasure([], [])


def test_from_weights_labels():
    mu = DiscreteMeasure.from_weights([0.5, 0.5])
    assert mu.atoms == ("w1", "w2")


def test_expect_and_mass():
    assert P3.expect([1, -1, 0]) == 0.0
    assert P3.mass({"a", "b"}) == pytest.approx(0.8, abs=1e-15)
    assert P3.expect({"a": 2, "b": 1, "c": 0}) == pytest.approx(1.2)
    with pytest.raises(ValidationError):
        P3.mass({"z"})


def test_density_ratio_case3_instance():
    prof = density_ratio(P3, Q3)
    assert prof.values == (1.6, 1.6, 0.4)
    assert prof.ess_sup == 1.6 and prof.ess_inf == 0.4
    assert prof.max_set == frozenset({"a", "b"})
    assert prof.inverse_ess_sup == 2.5


def test_density_ratio_ignores_q_null_atoms():
    P = DiscreteMeasure(["a", "b", "c"], [0.5, 0.5, 0.0])
    Q = DiscreteMeasure(["a", "b", "c"], [0.25, 0.75, 0.0])
    prof = density_ratio(P, Q)
    assert math.isnan(prof.values[2])
    assert prof.ess_sup == 2.0 and prof.ess_inf == pytest.approx(2 / 3)
    assert prof.q_support == ("a", "b")


def test_absolute_continuity_violation_names_atoms():
    P = DiscreteMeasure(["a", "b"], [0.5, 0.5])
    Q = DiscreteMeasure(["a", "b"], [1.0, 0.0])
    with pytest.raises(AbsoluteContinuityViolated) as err:
        density_ratio(P, Q)
    assert "b" in str(err.value)


def test_atoms_aligned_by_label():
    Q = DiscreteMeasure(["c", "a", "b"], [0.5, 0.25, 0.25])
    assert density_ratio(P3, Q).values == (1.6, 1.6, 0.4)


def test_tilt_identities():
    X = [1.0, -1.0, 0.0]
    tm = tilt(P3, Q3, P3.expect(X))
    # Q - P/s: 0 on A, 0.5 - 0.2/1.6 at c, 1/1.6 at y
    assert tm.base.weights == (0.0, 0.0, 0.375, 0.625)
    assert tm.y_label == "y"
    assert tm.base.mass(tm.max_set) == 0.0
    assert tm.base.expect(tm.extend(X)) == pytest.approx(Q3.expect(X), abs=1e-12)


def test_tilt_fresh_label_avoids_collision():
    P = DiscreteMeasure(["y", "y'"], [0.7, 0.3])
    Q = DiscreteMeasure(["y", "y'"], [0.5, 0.5])
    assert tilt(P, Q, 0.0).y_label == "y''"


def test_truncation():
    w, mass = truncate(P3, Q3, 1.0)
    assert w == (0.25, 0.25, 0.2) and mass == pytest.approx(0.7)
    w, mass = truncate(P3, Q3, 1.6)
    assert w == P3.weights
    assert normalized_truncation(P3, Q3, 1.6) == P3
    assert normalized_truncation(P3, Q3, 1.0).weights == pytest.approx((0.25 / 0.7, 0.25 / 0.7, 0.2 / 0.7))
    with pytest.raises(ValidationError):
        truncate(P3, Q3, 0.0)


def test_truncated_mass_monotone_random():
    rng = np.random.default_rng(3)
    for _ in range(200):
        n = int(rng.integers(2, 7))
        p = rng.dirichlet(np.ones(n))
        q = rng.dirichlet(np.ones(n))
        P, Q = DiscreteMeasure.from_weights(p / p.sum()), DiscreteMeasure.from_weights(q / q.sum())
        masses = [truncate(P, Q, k)[1] for k in (0.5, 1, 2, 4, 8)]
        assert masses == sorted(masses)


def test_condition():
    PA = condition(P3, {"a", "b"})
    assert PA.weights == (0.5, 0.5, 0.0)
    assert condition(P3, {"a", "b", "c"}) is P3
    P = DiscreteMeasure(["a", "b"], [1.0, 0.0])
    with pytest.raises(EmptyConditioningEvent):
        condition(P, {"b"})
