"""Finite discrete probability measures and the change-of-measure constructions.

Everything here is exact up to floating point: sums use :func:`math.fsum`
and the density ratio is an atomwise quotient.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Iterable, Sequence

import numpy as np

from .errors import AbsoluteContinuityViolated, EmptyConditioningEvent, ValidationError

SUM_TOL = 1e-12
MAX_SET_RTOL = 1e-12
# tilted weights this close below zero are roundoff and get snapped to 0
NEG_SNAP = 1e-15


@dataclass(frozen=True)
class DiscreteMeasure:
    """Probability measure on a finite, ordered set of labelled atoms."""

    atoms: tuple
    weights: tuple

    def __init__(self, atoms: Iterable[Hashable], weights: Iterable[float]):
        atoms = tuple(atoms)
        weights = tuple(float(w) for w in weights)
        if len(atoms) != len(weights):
            raise ValidationError(f"weights: expected {len(atoms)} entries, got {len(weights)}")
        if not atoms:
            raise ValidationError("atoms: a measure needs at least one atom")
        if len(set(atoms)) != len(atoms):
            raise ValidationError("atoms: labels must be distinct")
        bad = [a for a, w in zip(atoms, weights) if not (w >= 0.0 and math.isfinite(w))]
        if bad:
            raise ValidationError(f"weights: negative or non-finite weight on atoms {bad}")
        total = math.fsum(weights)
        if abs(total - 1.0) > SUM_TOL:
            raise ValidationError(f"weights: sum to {total!r}, not 1 (tolerance {SUM_TOL})")
        object.__setattr__(self, "atoms", atoms)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def from_weights(cls, weights: Sequence[float], prefix: str = "w") -> "DiscreteMeasure":
        """Label atoms ``w1, w2, ...`` in order."""
        return cls([f"{prefix}{i + 1}" for i in range(len(weights))], weights)

    def __len__(self) -> int:
        return len(self.atoms)

    def weight(self, atom) -> float:
        return self.weights[self.atoms.index(atom)]

    @property
    def support(self) -> tuple:
        return tuple(a for a, w in zip(self.atoms, self.weights) if w > 0.0)

    def mass(self, subset: Iterable[Hashable]) -> float:
        subset = set(subset)
        unknown = subset.difference(self.atoms)
        if unknown:
            raise ValidationError(f"unknown atoms {sorted(map(str, unknown))}")
        return math.fsum(w for a, w in zip(self.atoms, self.weights) if a in subset)

    def expect(self, values: Sequence[float]) -> float:
        """Integral of ``values`` (aligned with ``atoms``) against this measure."""
        values = _aligned_values(self, values)
        return math.fsum(w * v for w, v in zip(self.weights, values) if w > 0.0)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.weights, dtype=float)


@dataclass(frozen=True)
class RatioProfile:
    """Atomwise Radon-Nikodym derivative dP/dQ.

    ``values`` holds ``nan`` on atoms outside the Q-support; those atoms are
    Q-null and play no role in essential bounds.
    """

    atoms: tuple
    values: tuple
    ess_sup: float
    ess_inf: float
    max_set: frozenset
    q_support: tuple

    def value(self, atom) -> float:
        return self.values[self.atoms.index(atom)]

    @property
    def mutually_continuous(self) -> bool:
        """True when Q << P as well, i.e. the essential infimum is positive."""
        return self.ess_inf > 0.0

    @property
    def inverse_ess_sup(self) -> float:
        """||dQ/dP||_inf, finite exactly when ``ess_inf > 0``."""
        return 1.0 / self.ess_inf if self.ess_inf > 0.0 else math.inf


@dataclass(frozen=True)
class TiltedMeasure:
    """Auxiliary probability on the atoms plus one fresh point ``y_label``.

    ``base`` gives weight Q - P/||dP/dQ|| on the original atoms and
    ``1/||dP/dQ||`` on the new point, where the extended variable takes the
    value ``x_tilde_at_y``.
    """

    base: DiscreteMeasure
    y_label: Hashable
    y_mass: float
    x_tilde_at_y: float
    max_set: frozenset

    def extend(self, values: Sequence[float]) -> tuple:
        """X on the original atoms, ``x_tilde_at_y`` on the new point."""
        return tuple(float(v) for v in values) + (self.x_tilde_at_y,)


def _aligned_values(mu: DiscreteMeasure, values) -> list:
    if isinstance(values, dict):
        try:
            return [float(values[a]) for a in mu.atoms]
        except KeyError as exc:
            raise ValidationError(f"X: no value for atom {exc.args[0]!r}") from None
    values = [float(v) for v in values]
    if len(values) != len(mu.atoms):
        raise ValidationError(f"X: expected {len(mu.atoms)} values, got {len(values)}")
    return values


def aligned_weights(P: DiscreteMeasure, Q: DiscreteMeasure) -> tuple[np.ndarray, np.ndarray]:
    """Weights of P and Q in P's atom order; the atom sets must coincide."""
    if P.atoms == Q.atoms:
        return P.as_array(), Q.as_array()
    if set(P.atoms) != set(Q.atoms):
        raise ValidationError("P and Q must be defined on the same atoms")
    q_by_atom = dict(zip(Q.atoms, Q.weights))
    return P.as_array(), np.array([q_by_atom[a] for a in P.atoms])


def density_ratio(P: DiscreteMeasure, Q: DiscreteMeasure) -> RatioProfile:
    p, q = aligned_weights(P, Q)
    violating = [a for a, pw, qw in zip(P.atoms, p, q) if pw > 0.0 and qw == 0.0]
    if violating:
        raise AbsoluteContinuityViolated(violating)
    on_q = q > 0.0
    values = np.full(len(p), np.nan)
    values[on_q] = p[on_q] / q[on_q]
    sup = float(values[on_q].max())
    inf = float(values[on_q].min())
    max_set = frozenset(
        a for a, v, s in zip(P.atoms, values, on_q) if s and abs(v - sup) <= MAX_SET_RTOL * sup
    )
    return RatioProfile(
        atoms=P.atoms,
        values=tuple(float(v) for v in values),
        ess_sup=sup,
        ess_inf=inf,
        max_set=max_set,
        q_support=tuple(a for a, s in zip(P.atoms, on_q) if s),
    )


def _fresh_label(atoms: Sequence[Hashable]) -> str:
    taken = set(atoms)
    label = "y"
    while label in taken:
        label += "'"
    return label


def tilt(P: DiscreteMeasure, Q: DiscreteMeasure, mean_P_of_X: float) -> TiltedMeasure:
    profile = density_ratio(P, Q)
    p, q = aligned_weights(P, Q)
    inv = 1.0 / profile.ess_sup
    w = q - inv * p
    in_a = np.array([a in profile.max_set for a in P.atoms])
    # exactly zero on the maximizing set, by construction rather than by roundoff
    w[in_a] = 0.0
    if np.any(w < -NEG_SNAP * max(1.0, float(q.max()))):
        raise ValidationError("tilted weights went negative; density ratio is inconsistent")
    w = np.maximum(w, 0.0)
    y = _fresh_label(P.atoms)
    base = DiscreteMeasure(P.atoms + (y,), list(w) + [inv])
    return TiltedMeasure(
        base=base, y_label=y, y_mass=inv, x_tilde_at_y=float(mean_P_of_X), max_set=profile.max_set
    )


def truncate(P: DiscreteMeasure, Q: DiscreteMeasure, n: float) -> tuple[tuple, float]:
    """Sub-probability min(dP/dQ, n) dQ, unnormalized, and its total mass."""
    if not n > 0:
        raise ValidationError(f"n must be positive, got {n}")
    profile = density_ratio(P, Q)
    p, q = aligned_weights(P, Q)
    # where the cap is inactive min(r, n) q is just p; use it verbatim
    weights = tuple(
        0.0 if qw == 0.0 else float(pw) if r <= n else float(n * qw)
        for r, pw, qw in zip(profile.values, p, q)
    )
    return weights, math.fsum(weights)


def normalized_truncation(P: DiscreteMeasure, Q: DiscreteMeasure, n: float) -> DiscreteMeasure:
    weights, mass = truncate(P, Q, n)
    if n >= density_ratio(P, Q).ess_sup:
        # min(r, n) is inactive; hand back P itself instead of a re-rounded copy
        return DiscreteMeasure(P.atoms, aligned_weights(P, Q)[0])
    return DiscreteMeasure(P.atoms, [w / mass for w in weights])


def condition(P: DiscreteMeasure, A: Iterable[Hashable]) -> DiscreteMeasure:
    A = set(A)
    pa = P.mass(A)
    if pa <= 0.0:
        raise EmptyConditioningEvent(f"P(A) = {pa}; cannot condition on a null event")
    if A.issuperset(P.support):
        return P
    return DiscreteMeasure(P.atoms, [w / pa if a in A else 0.0 for a, w in zip(P.atoms, P.weights)])
