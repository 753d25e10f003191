"""Acceptance criteria 1-10, one PASS/FAIL line each.

Run with ``pytest -s tests/test_acceptance.py`` to see the lines, or
directly with ``python tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest

from jensengap.errors import ClassifierContradiction
from jensengap.funcspace import parse_expr
from jensengap.gap import CASE2, CASE3, classify_equality, conditional_variance_bound, dragomir_bounds, jensen_gap
from jensengap.measure import DiscreteMeasure, density_ratio, normalized_truncation, truncate
from jensengap.quad import gaussian_ratio, gaussian_variance_bounds, remark1_instance, remark2_instance
from jensengap.verify import (
    STRICT_PHIS,
    _phi,
    check_sandwich,
    check_tilt,
    check_transfer,
    random_instance,
)

SEED = 20241015
COUNT = 1000


def line(n: int, ok: bool, detail: str):
    print(f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {detail}")
    assert ok, detail


@pytest.fixture(scope="module")
def instances():
    return [random_instance(SEED, i) for i in range(COUNT)]


def test_01_sandwich(instances):
    assert {inst.phi for inst in instances} == set(STRICT_PHIS)
    assert max(len(inst.P) for inst in instances) <= 8
    start = time.perf_counter()
    failures = [i for i, inst in enumerate(instances) if check_sandwich(inst) is not None]
    elapsed = time.perf_counter() - start
    line(1, not failures and elapsed < 5.0,
         f"{COUNT - len(failures)}/{COUNT} sandwich checks hold at tol 1e-9*max(1, gap_Q), {elapsed:.2f} s")


def test_02_case3_instance():
    P = DiscreteMeasure.from_weights([0.4, 0.4, 0.2])
    Q = DiscreteMeasure.from_weights([0.25, 0.25, 0.5])
    X, phi = [1.0, -1.0, 0.0], parse_expr("t^2")
    rep = dragomir_bounds(P, Q, X, phi)
    diag = classify_equality(P, Q, X, phi)
    ok = (abs(rep.gap_P - 0.8) <= 1e-12 and abs(rep.upper_bound - 0.8) <= 1e-12
          and diag.case == CASE3 and diag.evidence["c"] == 0.0
          and diag.cond_a and diag.cond_b and diag.cond_c)
    line(2, ok, f"gap_P={rep.gap_P!r} upper={rep.upper_bound!r} case={diag.case} c={diag.evidence['c']}")


def test_03_classifier_soundness(instances):
    mismatches, contradictions, equal = 0, 0, 0
    for inst in instances:
        phi = _phi(inst.phi)
        try:
            diag = classify_equality(inst.P, inst.Q, inst.X, phi)
        except ClassifierContradiction:
            contradictions += 1
            continue
        rep = dragomir_bounds(inst.P, inst.Q, inst.X, phi)
        numeric = abs(rep.gap_P - rep.ess_sup * rep.gap_Q) <= 1e-9 * max(1.0, rep.gap_Q)
        equal += numeric
        mismatches += (diag.case in (CASE2, CASE3)) != numeric
    line(3, mismatches == 0 and contradictions == 0,
         f"{mismatches} mismatches, {contradictions} contradictions ({equal} equality instances)")


def test_04_absolute_continuity_needed():
    rep = remark1_instance()
    ok = abs(rep.gap_P - 0.25) <= 1e-9 and rep.gap_Q == 0.0 and not rep.bound_holds
    line(4, ok, f"gap_P={rep.gap_P!r}, gap_Q={rep.gap_Q!r}, bound holds: {rep.bound_holds}")


def test_05_no_finite_lp_norm_suffices():
    reps = [remark2_instance(1.0, eps) for eps in (1e-3, 1e-6, 1e-9)]
    gap_q_ok = all(abs(r.gap_Q_quadrature - 2 / 9) <= 1e-6 for r in reps)
    remainders = [r.gap_P_truncated - 0.5 * math.log(1 / r.eps) for r in reps]
    variation = max(remainders) - min(remainders)
    ratios = [r.ratio for r in reps]
    increasing = all(b > a for a, b in zip(ratios, ratios[1:]))
    line(5, gap_q_ok and variation < 0.01 and increasing,
         f"gap_Q={reps[0].gap_Q_quadrature!r}, remainder variation {variation:.2e}, "
         f"ratios {[round(r, 3) for r in ratios]}")


def test_06_conditional_variance():
    P = DiscreteMeasure.from_weights([0.25, 0.25, 0.5])
    var_a, var, bound = conditional_variance_bound(P, {"w1", "w2"}, [1.0, -1.0, 0.0])
    ok = abs(var_a - 1.0) <= 1e-12 and abs(bound - 1.0) <= 1e-12
    line(6, ok, f"Var_A={var_a!r}, Var/P(A)={bound!r}")


def test_07_gaussian_change_of_measure():
    hat = parse_expr("max(0, 1 - abs(2*t - 3))")
    out = gaussian_variance_bounds(hat, 1.0, 1.5, (1.0, 2.0), breakpoints=(1.0, 1.5, 2.0))
    ratio, _ = gaussian_ratio(1.0, 1.5)
    xs = np.linspace(-4.0, 4.0, 101)

    def pdf(x, s):
        return math.exp(-x * x / (2 * s * s)) / (s * math.sqrt(2 * math.pi))

    identity = max(abs(ratio(x) * pdf(x, 1.5) - pdf(x, 1.0)) for x in xs)
    ok = out.upper_holds(1e-6) and out.lower_holds(1e-6) and identity <= 1e-12
    line(7, ok, f"{out.lower_factor:.4f}*{out.var2:.6f} <= var1={out.var1:.6f} <= "
                f"{out.upper_factor}*{out.var2:.6f}; ratio identity error {identity:.1e}")


def test_08_tilt(instances):
    failures = [i for i, inst in enumerate(instances)
                if check_tilt(inst, np.random.default_rng([SEED, i])) is not None]
    line(8, not failures, f"{COUNT - len(failures)}/{COUNT} tilted measures satisfy the identities")


def test_09_transfer(instances):
    failures = [i for i, inst in enumerate(instances) if check_transfer(inst, SEED) is not None]
    line(9, not failures, f"{COUNT - len(failures)}/{COUNT} transfer checks (strict and affine-piece phi)")


def test_10_truncation(instances):
    bad, mono_mean, mono_gap = [], 0, 0
    for i, inst in enumerate(instances):
        phi = _phi(inst.phi)
        prof = density_ratio(inst.P, inst.Q)
        ns = sorted({1.0, 2.0, 4.0, prof.ess_sup})
        p = np.asarray(inst.P.weights)
        masses = [truncate(inst.P, inst.Q, n)[1] for n in ns]
        measures = [normalized_truncation(inst.P, inst.Q, n) for n in ns]
        tv = [0.5 * float(np.abs(np.asarray(m.weights) - p).sum()) for m in measures]
        mean_p, gap_p = inst.P.expect(inst.X), jensen_gap(inst.P, inst.X, phi)
        err_mean = [abs(m.expect(inst.X) - mean_p) for m in measures]
        err_gap = [abs(jensen_gap(m, inst.X, phi) - gap_p) for m in measures]
        exact = measures[-1].weights == inst.P.weights and err_mean[-1] == 0.0 and err_gap[-1] == 0.0
        monotone = (all(b >= a for a, b in zip(masses, masses[1:]))
                    and all(b <= a + 1e-15 for a, b in zip(tv, tv[1:])))
        if not (exact and monotone):
            bad.append(i)
        mono_mean += all(b <= a + 1e-12 for a, b in zip(err_mean, err_mean[1:]))
        mono_gap += all(b <= a + 1e-9 * max(1.0, gap_p) for a, b in zip(err_gap, err_gap[1:]))
    line(10, not bad,
         f"exact at n=ess_sup and monotone mass/TV in {COUNT - len(bad)}/{COUNT}; "
         f"diagnostic: mean error monotone in {mono_mean}, gap error in {mono_gap}")


if __name__ == "__main__":
    import sys

    sys.exit(pytest.main([__file__, "-q", "-s"]))
