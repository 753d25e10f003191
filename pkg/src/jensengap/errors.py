"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class JensenGapError(Exception):
    """Base class for every error raised by this package."""


class ValidationError(JensenGapError, ValueError):
    """Malformed user input (measures, problem files, options)."""


class AbsoluteContinuityViolated(ValidationError):
    """P puts mass on an atom (or region) where Q has none."""

    def __init__(self, atoms):
        self.atoms = list(atoms)
        super().__init__(f"P is not absolutely continuous w.r.t. Q; offending atoms: {self.atoms}")


class EmptyConditioningEvent(ValidationError):
    """Conditioning on an event of probability zero."""


class RangeNotContained(ValidationError):
    """Some value of X falls outside the domain of phi."""


class NotConvex(ValidationError):
    pass


class NotConcave(ValidationError):
    pass


class NotStrictlyConvex(ValidationError):
    pass


class NonpositiveValue(ValidationError):
    pass


class InvalidSigmaOrder(ValidationError):
    pass


class ParseError(ValidationError):
    """Malformed expression text.

    ``offset`` is the byte offset into the source where parsing stopped and
    ``expected`` the set of tokens that would have been accepted there.
    """

    def __init__(self, message: str, offset: int, expected=()):
        self.offset = offset
        self.expected = frozenset(expected)
        exp = ", ".join(sorted(self.expected))
        detail = f" (expected one of: {exp})" if exp else ""
        super().__init__(f"{message} at offset {offset}{detail}")


class DomainError(JensenGapError, ArithmeticError):
    """An expression could not be evaluated to a finite real."""


class NonConvergence(JensenGapError):
    """Adaptive quadrature gave up before meeting its tolerance.

    ``partial`` is the best estimate reached, ``trend`` a list of
    ``(cutoff, value)`` pairs from geometrically shrinking endpoint cutoffs,
    and ``divergent`` the verdict drawn from that trend. ``kind`` names which
    integral failed ("integral", "mean", "gap").
    """

    def __init__(self, message, partial, abs_error, trend=(), divergent=False, kind="integral"):
        self.partial = partial
        self.abs_error = abs_error
        self.trend = list(trend)
        self.divergent = divergent
        self.kind = kind
        super().__init__(message)


class TheoremViolation(JensenGapError):
    """A proven inequality failed beyond tolerance; this is an internal bug."""


class ClassifierContradiction(TheoremViolation):
    """Equality-condition logic and the numeric comparison disagree."""
