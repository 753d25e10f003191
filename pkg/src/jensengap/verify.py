"""Seeded random property suites over small discrete instances.

Instance ``i`` of a run with seed ``s`` is drawn from its own generator
``default_rng([s, i])``, so results do not depend on evaluation order or on
how many workers share the run.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import JensenGapError
from .funcspace import FuncExpr, parse_expr
from .gap import (
    CASE2,
    CASE3,
    classify_equality,
    dragomir_bounds,
    equality_transfer_check,
    jensen_gap,
)
from .measure import DiscreteMeasure, density_ratio, normalized_truncation, tilt, truncate

STRICT_PHIS = ("t^2", "exp(t)", "t^4")
# (expression, sampler for X on one affine piece)
PIECEWISE_AFFINE = (
    ("abs(t)", lambda rng, n: rng.uniform(0.0, 10.0, n)),
    ("abs(t)", lambda rng, n: rng.uniform(-10.0, 0.0, n)),
    ("max(t, 0)", lambda rng, n: rng.uniform(0.0, 10.0, n)),
    ("max(t, 0)", lambda rng, n: rng.uniform(-10.0, 0.0, n)),
    ("max(2*t, 3*t - 1)", lambda rng, n: rng.uniform(1.0, 10.0, n)),
    ("max(2*t, 3*t - 1)", lambda rng, n: rng.uniform(-10.0, 1.0, n)),
)
SUITES = ("sandwich", "classifier", "transfer", "tilt", "truncation")


@lru_cache(maxsize=None)
def _phi(text: str) -> FuncExpr:
    return parse_expr(text)


@dataclass(frozen=True)
class Instance:
    index: int
    P: DiscreteMeasure
    Q: DiscreteMeasure
    X: tuple
    phi: str
    kind: str  # random, case2, case3

    def dump(self) -> dict:
        return {
            "index": self.index,
            "kind": self.kind,
            "atoms": list(self.P.atoms),
            "P": list(self.P.weights),
            "Q": list(self.Q.weights),
            "X": list(self.X),
            "phi": self.phi,
        }


def _normalize(w: np.ndarray) -> list:
    w = w / math.fsum(w)
    # push the rounding residue onto the largest weight so the sum is 1 to the last bit
    i = int(np.argmax(w))
    w[i] = 1.0 - math.fsum(np.delete(w, i))
    return [float(v) for v in w]


def random_instance(seed: int, index: int) -> Instance:
    """A random P << Q on 2..8 atoms, X in [-10, 10], phi strictly convex.

    About one instance in ten is built to sit in equality case 3 and one in
    twenty has X constant, so the equality suites see both outcomes.
    """
    rng = np.random.default_rng([seed, index])
    n = int(rng.integers(2, 9))
    atoms = [f"w{i + 1}" for i in range(n)]
    q = np.array(_normalize(rng.uniform(0.05, 1.0, n)))
    phi = STRICT_PHIS[index % len(STRICT_PHIS)]
    roll = rng.random()

    if roll < 0.1 and n >= 3:
        # equality case 3: dP/dQ = s on A (|A| >= 2), smaller elsewhere; X = c off A,
        # non-constant on A with Q-mean c there
        k = int(rng.integers(2, n))
        in_a = np.zeros(n, dtype=bool)
        in_a[rng.choice(n, size=k, replace=False)] = True
        r = np.where(in_a, 0.0, rng.uniform(0.0, 0.9, n))
        s = (1.0 - math.fsum(r * q)) / math.fsum(q[in_a])
        p = _normalize(np.where(in_a, s * q, r * q))
        c = float(rng.uniform(-5.0, 5.0))
        x = np.full(n, c)
        qa = q[in_a]
        xa = rng.uniform(-5.0, 5.0, k)
        x[in_a] = xa - math.fsum(qa * xa) / math.fsum(qa) + c
        return Instance(index, DiscreteMeasure(atoms, p), DiscreteMeasure(atoms, q),
                        tuple(float(v) for v in x), phi, "case3")

    p_raw = rng.uniform(0.0, 1.0, n) * (rng.random(n) > 0.2)
    if p_raw.sum() == 0.0:
        p_raw[int(rng.integers(n))] = 1.0
    p = _normalize(p_raw)
    if np.allclose(p, q, rtol=0, atol=1e-12):
        p = _normalize(np.roll(p_raw, 1) + 0.5)
    if roll < 0.15:
        x = np.full(n, float(rng.uniform(-10.0, 10.0)))
        kind = "case2"
    else:
        x = rng.uniform(-10.0, 10.0, n)
        kind = "random"
    return Instance(index, DiscreteMeasure(atoms, p), DiscreteMeasure(atoms, q), tuple(float(v) for v in x), phi, kind)


def transfer_instance(seed: int, index: int) -> Instance:
    """Piecewise-affine phi with X confined to one affine piece, so gap_Q = 0."""
    rng = np.random.default_rng([seed, index, 1])
    n = int(rng.integers(2, 9))
    atoms = [f"w{i + 1}" for i in range(n)]
    q = _normalize(rng.uniform(0.05, 1.0, n))
    p_raw = rng.uniform(0.0, 1.0, n) * (rng.random(n) > 0.2)
    if p_raw.sum() == 0.0:
        p_raw[0] = 1.0
    phi, sampler = PIECEWISE_AFFINE[index % len(PIECEWISE_AFFINE)]
    x = sampler(rng, n)
    return Instance(index, DiscreteMeasure(atoms, _normalize(p_raw)), DiscreteMeasure(atoms, q),
                    tuple(float(v) for v in x), phi, "affine-piece")


# ---------------------------------------------------------------------------
# checks; each returns None on success or a failure message


def check_sandwich(inst: Instance) -> str | None:
    rep = dragomir_bounds(inst.P, inst.Q, inst.X, _phi(inst.phi))
    tol = 1e-9 * max(1.0, rep.gap_Q)
    if not rep.ess_inf * rep.gap_Q - tol <= rep.gap_P <= rep.ess_sup * rep.gap_Q + tol:
        return f"sandwich violated: {rep.ess_inf}*{rep.gap_Q} <= {rep.gap_P} <= {rep.ess_sup}*{rep.gap_Q}"
    return None


def check_classifier(inst: Instance) -> str | None:
    diag = classify_equality(inst.P, inst.Q, inst.X, _phi(inst.phi))
    rep = dragomir_bounds(inst.P, inst.Q, inst.X, _phi(inst.phi))
    tol = 1e-9 * max(1.0, rep.gap_Q)
    numeric = abs(rep.gap_P - rep.ess_sup * rep.gap_Q) <= tol
    reported = diag.case in (CASE2, CASE3)
    if reported != numeric:
        return f"classifier said {diag.case} but |gap_P - bound| <= tol is {numeric}"
    if inst.kind in ("case2", "case3") and diag.case != {"case2": CASE2, "case3": CASE3}[inst.kind]:
        return f"constructed {inst.kind} instance classified as {diag.case}"
    return None


def check_transfer(inst: Instance, seed: int) -> str | None:
    equality_transfer_check(inst.Q, inst.P, inst.X, _phi(inst.phi))
    aff = transfer_instance(seed, inst.index)
    equality_transfer_check(aff.Q, aff.P, aff.X, _phi(aff.phi))
    gap_q = jensen_gap(aff.Q, aff.X, _phi(aff.phi))
    if gap_q != 0.0:
        return f"affine-piece instance has gap_Q = {gap_q!r}, expected 0"
    return None


def check_tilt(inst: Instance, rng: np.random.Generator) -> str | None:
    mean_p = inst.P.expect(inst.X)
    tm = tilt(inst.P, inst.Q, mean_p)
    w = np.asarray(tm.base.weights)
    if abs(math.fsum(w) - 1.0) > 1e-12 or np.any(w < 0.0):
        return f"tilted measure is not a probability: {tm.base.weights}"
    if tm.base.mass(tm.max_set) != 0.0:
        return f"tilted measure charges A: {tm.base.mass(tm.max_set)!r}"
    lhs = tm.base.expect(tm.extend(inst.X))
    rhs = inst.Q.expect(inst.X)
    if abs(lhs - rhs) > 1e-12:
        return f"E over tilted measure {lhs!r} != E_Q X {rhs!r}"
    q = dict(zip(inst.Q.atoms, inst.Q.weights))
    p = dict(zip(inst.P.atoms, inst.P.weights))
    for atom in tm.max_set:
        if (p[atom] == 0.0) != (q[atom] == 0.0):
            return f"null sets of P and Q differ on A at {atom}"
    outside = [a for a in inst.P.atoms if a not in tm.max_set]
    for _ in range(4):
        B = [a for a in outside if rng.random() < 0.5]
        if (tm.base.mass(B) == 0.0) != (math.fsum(q[a] for a in B) == 0.0):
            return f"tilted mass and Q-mass disagree on nullity for {B}"
    return None


def check_truncation(inst: Instance) -> str | None:
    prof = density_ratio(inst.P, inst.Q)
    ns = sorted({1.0, 2.0, 4.0, prof.ess_sup})
    masses = [truncate(inst.P, inst.Q, n)[1] for n in ns]
    if any(b < a for a, b in zip(masses, masses[1:])):
        return f"truncated mass not monotone: {masses}"
    p = np.asarray(inst.P.weights)
    tv = [0.5 * float(np.abs(np.asarray(normalized_truncation(inst.P, inst.Q, n).weights) - p).sum()) for n in ns]
    if any(b > a + 1e-15 for a, b in zip(tv, tv[1:])):
        return f"total variation to P not monotone: {tv}"
    at_sup = normalized_truncation(inst.P, inst.Q, prof.ess_sup)
    if at_sup.weights != inst.P.weights or truncate(inst.P, inst.Q, prof.ess_sup)[1] != math.fsum(inst.P.weights):
        return "truncation at ess sup does not reproduce P"
    return None


@dataclass
class InstanceResult:
    index: int
    failures: dict = field(default_factory=dict)
    dump: dict | None = None

    @property
    def ok(self) -> bool:
        return not self.failures


def run_instance(seed: int, index: int) -> InstanceResult:
    inst = random_instance(seed, index)
    rng = np.random.default_rng([seed, index, 2])
    out = InstanceResult(index)
    checks = {
        "sandwich": lambda: check_sandwich(inst),
        "classifier": lambda: check_classifier(inst),
        "transfer": lambda: check_transfer(inst, seed),
        "tilt": lambda: check_tilt(inst, rng),
        "truncation": lambda: check_truncation(inst),
    }
    for name, check in checks.items():
        try:
            msg = check()
        except JensenGapError as exc:
            msg = f"{type(exc).__name__}: {exc}"
        if msg is not None:
            out.failures[name] = msg
    if out.failures:
        out.dump = inst.dump()
    return out


def run(seed: int, count: int, jobs: int = 1) -> dict:
    """Run ``count`` instances and return a summary dict (deterministic for a seed)."""
    if count < 1:
        raise ValueError("count must be at least 1")
    indices = range(count)
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(lambda i: run_instance(seed, i), indices))
    else:
        results = [run_instance(seed, i) for i in indices]
    suites = {name: {"passed": 0, "failed": 0} for name in SUITES}
    for res in results:
        for name in SUITES:
            suites[name]["failed" if name in res.failures else "passed"] += 1
    failed = [r for r in results if not r.ok]
    first = None
    if failed:
        r = min(failed, key=lambda r: r.index)
        first = {"index": r.index, "failures": r.failures, "instance": r.dump}
    return {
        "seed": seed,
        "count": count,
        "passed": count - len(failed),
        "failed": len(failed),
        "suites": suites,
        "first_failure": first,
    }
