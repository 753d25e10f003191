"""Command line front end: problem files in, JSON reports out.

Exit codes
  0  success
  1  verify found failing instances
  2  usage, file, parse or validation error (including convexity gates)
  3  a proven inequality failed: an internal bug
  4  quadrature did not converge and no divergence could be diagnosed
"""

from __future__ import annotations

import argparse
import json
import math
import re
import sys
from dataclasses import asdict, dataclass, field

import jsonschema
import numpy as np

from . import __version__
from .errors import (
    JensenGapError,
    NonConvergence,
    NotStrictlyConvex,
    TheoremViolation,
    ValidationError,
)
from .funcspace import classify_on_points, parse_expr
from .gap import (
    CASE1,
    CASE2,
    CASE3,
    STRICT,
    amgm_bounds,
    classify_equality,
    concave_bounds,
    dragomir_bounds,
    tolerance,
)
from .measure import DiscreteMeasure
from . import quad, verify

EXIT_OK, EXIT_FAILURES, EXIT_INVALID, EXIT_VIOLATION, EXIT_NUMERIC = 0, 1, 2, 3, 4
TOOL = "jensengap"

_INTERVAL = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

PROBLEM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema_version", "kind", "P", "Q", "X", "phi"],
    "additionalProperties": False,
    "properties": {
        "schema_version": {"const": 1},
        "kind": {"enum": ["discrete", "continuous"]},
        "P": {"$ref": "#/$defs/measure"},
        "Q": {"$ref": "#/$defs/measure"},
        "X": {
            "oneOf": [
                {"type": "string"},
                {"type": "array", "items": {"type": "number"}, "minItems": 1},
            ]
        },
        "phi": {
            "type": "object",
            "required": ["expr", "intent"],
            "additionalProperties": False,
            "properties": {
                "expr": {"type": "string"},
                "intent": {"enum": ["convex", "concave", "amgm"]},
            },
        },
        "options": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "tol": {"type": "number", "exclusiveMinimum": 0},
                "quad_tol": {"type": "number", "minimum": 1e-12},
                "grid": {"type": "integer", "minimum": 16},
            },
        },
    },
    "$defs": {
        "measure": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["atoms", "weights"],
                    "additionalProperties": False,
                    "properties": {
                        "atoms": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                        "weights": {"type": "array", "items": {"type": "number"}, "minItems": 1},
                    },
                },
                {
                    "type": "object",
                    "required": ["family", "support"],
                    "additionalProperties": False,
                    "properties": {"family": {"const": "lebesgue"}, "support": _INTERVAL},
                },
                {
                    "type": "object",
                    "required": ["family", "mean", "sigma"],
                    "additionalProperties": False,
                    "properties": {
                        "family": {"const": "gaussian"},
                        "mean": {"type": "number"},
                        "sigma": {"type": "number", "exclusiveMinimum": 0},
                    },
                },
                {
                    "type": "object",
                    "required": ["family", "expr", "support"],
                    "additionalProperties": False,
                    "properties": {
                        "family": {"const": "density"},
                        "expr": {"type": "string"},
                        "support": _INTERVAL,
                    },
                },
            ]
        }
    },
}

_NUMBER = {"oneOf": [{"type": "number"}, {"enum": ["inf", "-inf", "nan"]}]}

REPORT_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["tool", "version", "command", "problem", "bounds", "diagnosis",
                 "counterexample", "verify", "warnings"],
    "additionalProperties": False,
    "properties": {
        "tool": {"const": TOOL},
        "version": {"type": "string"},
        "command": {"enum": ["bounds", "diagnose", "verify", "counterexample"]},
        "problem": {"type": ["object", "null"]},
        "bounds": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "required": ["gap_P", "gap_Q", "ess_sup", "ess_inf", "upper_bound", "lower_bound",
                                 "upper_slack", "lower_slack", "gap_P_finite", "gap_Q_finite", "orientation"],
                    "properties": {
                        **{k: _NUMBER for k in ("gap_P", "gap_Q", "ess_sup", "ess_inf", "upper_bound",
                                                "lower_bound", "upper_slack", "lower_slack",
                                                "mean_P", "mean_Q")},
                        "gap_P_finite": {"type": "boolean"},
                        "gap_Q_finite": {"type": "boolean"},
                        "orientation": {"enum": ["convex", "concave", "amgm"]},
                        "notes": {"type": "array", "items": {"type": "string"}},
                    },
                },
            ]
        },
        "diagnosis": {
            "oneOf": [
                {"type": "null"},
                {
                    "type": "object",
                    "required": ["case", "cond_a", "cond_b", "cond_c", "numeric_equal"],
                    "properties": {
                        "case": {"type": "string"},
                        "cond_a": {"type": "boolean"},
                        "cond_b": {"type": "boolean"},
                        "cond_c": {"type": "boolean"},
                        "numeric_equal": {"type": "boolean"},
                    },
                },
            ]
        },
        "counterexample": {"type": ["object", "null"]},
        "verify": {"type": ["object", "null"]},
        "warnings": {"type": "array", "items": {"type": "string"}},
    },
}


def encode(value):
    """JSON-safe copy: non-finite floats become "inf" / "-inf" / "nan" markers."""
    if isinstance(value, dict):
        return {str(k): encode(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = sorted(value, key=str) if isinstance(value, (set, frozenset)) else value
        return [encode(v) for v in items]
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return value
    return value


def decode_number(value) -> float:
    """Inverse of :func:`encode` for a single numeric field."""
    return float(value)


@dataclass
class Report:
    command: str
    problem: dict | None = None
    bounds: dict | None = None
    diagnosis: dict | None = None
    counterexample: dict | None = None
    verify: dict | None = None
    warnings: list = field(default_factory=list)
    tool: str = TOOL
    version: str = __version__

    def to_dict(self) -> dict:
        return encode(asdict(self))

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True, allow_nan=False)

    @classmethod
    def from_json(cls, text: str) -> "Report":
        data = json.loads(text)
        jsonschema.validate(data, REPORT_SCHEMA)
        return cls(**data)


# ---------------------------------------------------------------------------
# problem loading


def _path(error: jsonschema.ValidationError) -> str:
    return ".".join(str(p) for p in error.absolute_path) or "<root>"


def validate_problem(data) -> dict:
    """Check ``data`` against the problem schema; errors name the offending field."""
    validator = jsonschema.Draft202012Validator(PROBLEM_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: (len(e.absolute_path), _path(e)))
    if errors:
        # oneOf failures are vague at the top; report the most specific sub-error
        err = errors[-1]
        best = jsonschema.exceptions.best_match([err]) if not err.context else min(
            err.context, key=lambda e: (-len(e.absolute_path), e.message))
        raise ValidationError(f"{_path(best)}: {best.message}")
    return data


def load_problem(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ValidationError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{path}: not valid JSON ({exc.msg} at line {exc.lineno})") from None
    return validate_problem(data)


_FIELD_PREFIX = re.compile(r"^[A-Za-z_][\w.]*: ")


def _field(name: str, build):
    try:
        return build()
    except ValidationError as exc:
        msg = str(exc)
        if not msg.startswith(name):
            # "weights: ..." becomes "P.weights: ..."; free text gets the field as a prefix
            exc.args = (f"{name}.{msg}" if _FIELD_PREFIX.match(msg) else f"{name}: {msg}",)
        raise


def _discrete(problem: dict):
    for side in ("P", "Q"):
        if "atoms" not in problem[side]:
            raise ValidationError(f"{side}: a discrete problem needs atoms and weights")
    P = _field("P", lambda: DiscreteMeasure(problem["P"]["atoms"], problem["P"]["weights"]))
    Q = _field("Q", lambda: DiscreteMeasure(problem["Q"]["atoms"], problem["Q"]["weights"]))
    if set(P.atoms) != set(Q.atoms):
        raise ValidationError("Q.atoms: P and Q must list the same atoms")
    X = problem["X"]
    if isinstance(X, str):
        raise ValidationError("X: a discrete problem needs one value per atom")
    if len(X) != len(P.atoms):
        raise ValidationError(f"X: expected {len(P.atoms)} values, got {len(X)}")
    phi = _field("phi.expr", lambda: parse_expr(problem["phi"]["expr"]))
    return P, Q, list(X), phi


def _density(spec: dict, side: str) -> quad.Density:
    family = spec.get("family")
    if family is None:
        raise ValidationError(f"{side}: a continuous problem needs a density family")

    def build():
        if family == "lebesgue":
            lo, hi = spec["support"]
            if not lo < hi:
                raise ValidationError("support: need a < b")
            return quad.lebesgue(lo, hi)
        if family == "gaussian":
            return quad.gaussian(spec["mean"], spec["sigma"])
        lo, hi = spec["support"]
        if not lo < hi:
            raise ValidationError("support: need a < b")
        return quad.make_density(parse_expr(spec["expr"]), (lo, hi))

    return _field(side, build)


def _continuous(problem: dict):
    P, Q = _density(problem["P"], "P"), _density(problem["Q"], "Q")
    if not isinstance(problem["X"], str):
        raise ValidationError("X: a continuous problem needs an expression in t")
    X = _field("X", lambda: parse_expr(problem["X"]))
    phi = _field("phi.expr", lambda: parse_expr(problem["phi"]["expr"]))
    return P, Q, X, phi


def _options(problem: dict) -> dict:
    opts = {"tol": 1e-9, "quad_tol": 1e-10, "grid": 64}
    opts.update(problem.get("options", {}))
    return opts


def _continuous_gate(Q: quad.Density, X, phi, want: str, grid: int) -> list:
    """Convexity gate over the range of X, probed on the support of Q."""
    pts = quad._interior_points(Q.support, Q.breakpoints)
    values = np.asarray(X(pts), dtype=float)
    report = classify_on_points(phi, values[np.isfinite(values)], grid)
    if report is None:
        return []
    ok = {"convex": report.is_convex, "concave": report.is_concave, "strict": report.is_strictly_convex}[want]
    if not ok:
        from .errors import NotConcave, NotConvex
        err = {"convex": NotConvex, "concave": NotConcave, "strict": NotStrictlyConvex}[want]
        raise err(f"phi.expr: {phi} is {report.classification} on the range of X")
    return [f"convexity of phi checked on the sampled range [{values.min():.6g}, {values.max():.6g}] of X"]


def _gap_bounds(problem: dict):
    """Compute the GapBoundReport for a validated problem; returns (report, warnings)."""
    opts = _options(problem)
    intent = problem["phi"]["intent"]
    warnings: list[str] = []
    if problem["kind"] == "discrete":
        P, Q, X, phi = _discrete(problem)
        if intent == "convex":
            rep = dragomir_bounds(P, Q, X, phi, grid=opts["grid"])
        elif intent == "concave":
            rep = concave_bounds(P, Q, X, phi, grid=opts["grid"])
        else:
            warnings.append("intent amgm: phi.expr is ignored; the gap is E X - exp(E log X)")
            rep = amgm_bounds(P, Q, X)
        if not (rep.lower_slack >= -opts["tol"] * max(1.0, rep.gap_Q)
                and rep.upper_slack >= -opts["tol"] * max(1.0, rep.gap_Q)):
            raise TheoremViolation(f"sandwich fails at tol {opts['tol']}: {rep}")
        return rep, warnings

    P, Q, X, phi = _continuous(problem)
    if intent == "amgm":
        X = X.compose(parse_expr("t"))
        phi_used = parse_expr("-log(t)")
        warnings.append("intent amgm: phi.expr is ignored; using phi = -log(t)")
    elif intent == "concave":
        warnings += _continuous_gate(Q, X, phi, "concave", opts["grid"])
        phi_used = -phi
    else:
        warnings += _continuous_gate(Q, X, phi, "convex", opts["grid"])
        phi_used = phi
    rep = quad.continuous_bounds(P, Q, X, phi_used, tol=opts["quad_tol"])
    warnings += list(rep.notes)
    if rep.gap_P_finite and rep.gap_Q_finite and math.isfinite(rep.upper_bound):
        slack = tolerance(rep.gap_Q, rep.upper_bound) + 1e3 * opts["quad_tol"]
        if rep.upper_slack < -slack or rep.lower_slack < -slack:
            warnings.append("estimated bounds are violated beyond quadrature tolerance; "
                            "the probed essential bounds are likely inaccurate")
    return rep, warnings


# ---------------------------------------------------------------------------
# commands


def cmd_bounds(path: str) -> Report:
    problem = load_problem(path)
    rep, warnings = _gap_bounds(problem)
    return Report("bounds", problem=problem, bounds=rep.to_dict(), warnings=warnings)


def cmd_diagnose(path: str) -> Report:
    problem = load_problem(path)
    if problem["phi"]["intent"] != "convex":
        raise NotStrictlyConvex("phi.intent: equality diagnosis needs a strictly convex phi (intent convex)")
    opts = _options(problem)
    if problem["kind"] == "discrete":
        P, Q, X, phi = _discrete(problem)
        diag = classify_equality(P, Q, X, phi, grid=opts["grid"])
        rep = dragomir_bounds(P, Q, X, phi, grid=opts["grid"])
        return Report("diagnose", problem=problem, bounds=rep.to_dict(), diagnosis=diag.to_dict())

    P, Q, X, phi = _continuous(problem)
    warnings = _continuous_gate(Q, X, phi, "strict", opts["grid"])
    rep = quad.continuous_bounds(P, Q, X, phi, tol=opts["quad_tol"])
    warnings += list(rep.notes)
    evidence = {"ess_sup": rep.ess_sup, "gap_P": rep.gap_P, "gap_Q": rep.gap_Q}
    infinite_rhs = not rep.gap_Q_finite or math.isinf(rep.ess_sup) and rep.gap_Q > 0
    if not rep.gap_P_finite and infinite_rhs:
        case, shared, equal = CASE1, math.inf, True
        warnings.append("both sides diverge; the gap values shown are truncated estimates")
    else:
        tol = tolerance(rep.gap_P, rep.upper_bound) + 1e3 * opts["quad_tol"]
        equal = rep.gap_P_finite and abs(rep.gap_P - rep.upper_bound) <= tol
        if equal and rep.gap_Q == 0.0:
            case, shared = CASE2, 0.0
        elif equal:
            case, shared = CASE3, rep.gap_P
        else:
            case, shared = STRICT, None
        warnings.append("continuous problems are classified numerically; conditions a/b/c are not evaluated")
    diag = {"case": case, "shared_value": shared, "cond_a": case != CASE1, "cond_b": False, "cond_c": False,
            "numeric_equal": equal, "evidence": evidence}
    return Report("diagnose", problem=problem, bounds=rep.to_dict(), diagnosis=diag, warnings=warnings)


def cmd_verify(seed: int, count: int, jobs: int = 1) -> Report:
    if count < 1:
        raise ValidationError("count: must be at least 1")
    return Report("verify", verify=verify.run(seed, count, jobs))


def cmd_counterexample(name: str, p: float = 1.0, eps: float = 1e-9) -> Report:
    if name == "remark1":
        rep = quad.remark1_instance()
        data = asdict(rep)
        data["fails"] = "gap_P <= ess_sup(dP/dQ) * gap_Q"
        data["excluded_because"] = "P is not absolutely continuous with respect to Q"
        return Report("counterexample", counterexample={"name": name, **data})
    if name == "remark2":
        rep = quad.remark2_instance(p=p, eps=eps)
        data = asdict(rep)
        data["fails"] = "gap_P <= ||dP/dQ||_p * gap_Q for every finite p"
        data["excluded_because"] = (
            "dP/dQ is unbounded, so its essential supremum is infinite and only the trivial bound remains"
        )
        warnings = ["gap_P_truncated integrates phi(X) over [eps, 1] only; the full integral diverges"]
        return Report("counterexample", counterexample={"name": name, **data}, warnings=warnings)
    raise ValidationError(f"name: unknown counterexample {name!r}")


# ---------------------------------------------------------------------------
# entry point


def _summary(report: Report) -> str:
    if report.verify is not None:
        v = report.verify
        return f"verify seed={v['seed']}: {v['passed']}/{v['count']} instances passed"
    if report.counterexample is not None:
        c = report.counterexample
        return f"{c['name']}: gap_P={c.get('gap_P', c.get('gap_P_truncated'))} gap_Q={c['gap_Q']}"
    b = report.bounds
    line = (f"{b['ess_inf']} * {b['gap_Q']} <= gap_P = {b['gap_P']} <= "
            f"{b['ess_sup']} * {b['gap_Q']} = {b['upper_bound']}")
    if report.diagnosis is not None:
        line += f"\nequality case: {report.diagnosis['case']}"
    return line


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=TOOL,
        description="Jensen gaps under a change of measure.",
        epilog="exit codes: 0 ok, 1 verify failures, 2 invalid input, 3 internal bug, 4 non-convergence",
    )
    parser.add_argument("--version", action="version", version=f"{TOOL} {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    b = sub.add_parser("bounds", help="gap bounds for a problem file")
    b.add_argument("file")
    d = sub.add_parser("diagnose", help="equality-case diagnosis for a problem file")
    d.add_argument("file")
    v = sub.add_parser("verify", help="randomized property suites")
    v.add_argument("--seed", type=int, required=True)
    v.add_argument("--count", type=int, required=True)
    v.add_argument("--jobs", type=int, default=1)
    c = sub.add_parser("counterexample", help="reproduce a canned counterexample")
    c.add_argument("name", choices=["remark1", "remark2"])
    c.add_argument("--p", type=float, default=1.0)
    c.add_argument("--eps", type=float, default=1e-9)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_INVALID if exc.code else EXIT_OK
    try:
        if args.command == "bounds":
            report = cmd_bounds(args.file)
        elif args.command == "diagnose":
            report = cmd_diagnose(args.file)
        elif args.command == "verify":
            report = cmd_verify(args.seed, args.count, args.jobs)
        else:
            report = cmd_counterexample(args.name, args.p, args.eps)
        text = report.to_json()
        jsonschema.validate(json.loads(text), REPORT_SCHEMA)
    except TheoremViolation as exc:
        print(f"error: internal bug, {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_VIOLATION
    except ValidationError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NonConvergence as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except JensenGapError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(text)
    for w in report.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(_summary(report), file=sys.stderr)
    if report.verify is not None and report.verify["failed"]:
        return EXIT_FAILURES
    return EXIT_OK
