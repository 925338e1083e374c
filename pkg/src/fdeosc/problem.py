"""Problem instances, deviation classification and the structural conditions A-E."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .expr import DomainError, Expression, Tabulated, constant_value, parse_expression
from .quadrature import ImproperPolicy, ImproperVerdict, classify_improper, classify_sequence

__all__ = [
    "ProblemError",
    "NonpositiveWeight",
    "EmptyTerms",
    "Term",
    "FDEProblem",
    "TermClassification",
    "Condition",
    "ConditionReport",
    "build_problem",
    "classify_terms",
    "evaluate_conditions",
    "sample_grid",
    "sum_of",
    "reciprocal",
]

FORMS = ("VariableCoeff", "ConstantShift")


class ProblemError(ValueError):
    pass


class NonpositiveWeight(ProblemError):
    def __init__(self, t: float, value: float):
        super().__init__(f"p(t) = {value!r} is not positive at t = {t!r}")
        self.t = t
        self.value = value


class EmptyTerms(ProblemError):
    def __init__(self):
        super().__init__("the equation needs at least one deviated term")


Coefficient = Expression | Tabulated


@dataclass(frozen=True)
class Term:
    q: Coefficient
    alpha: Coefficient
    bound_a0: float | None = None
    shift: float | None = None  # constant h in alpha(t) = t + h

    def describe(self) -> dict:
        return {
            "q": _describe(self.q),
            "alpha": _describe(self.alpha),
            "a0": self.bound_a0,
            "h": self.shift,
        }


@dataclass(frozen=True)
class FDEProblem:
    p: Coefficient
    terms: tuple[Term, ...]
    t0: float
    form: str = "VariableCoeff"

    @property
    def n(self) -> int:
        return len(self.terms)

    def describe(self) -> dict:
        return {
            "p": _describe(self.p),
            "t0": self.t0,
            "form": self.form,
            "terms": [term.describe() for term in self.terms],
        }


def _describe(c) -> Any:
    if isinstance(c, Expression):
        return c.serialize()
    if isinstance(c, Tabulated):
        return {"grid": [float(x) for x in c.grid], "values": [float(v) for v in c.values]}
    return repr(c)


def _coefficient(spec, params: Mapping[str, float], what: str) -> Coefficient:
    if isinstance(spec, (Expression, Tabulated)):
        return spec
    if isinstance(spec, (int, float)):
        return parse_expression(repr(float(spec)))
    if isinstance(spec, str):
        return parse_expression(spec, params)
    if isinstance(spec, Mapping) and "grid" in spec and "values" in spec:
        return Tabulated(np.asarray(spec["grid"], float), np.asarray(spec["values"], float))
    raise ProblemError(f"{what}: cannot interpret {spec!r} as a coefficient")


def _number(spec, params: Mapping[str, float], what: str) -> float:
    if isinstance(spec, (int, float)):
        return float(spec)
    if isinstance(spec, str):
        return constant_value(spec, params)
    raise ProblemError(f"{what}: expected a number, got {spec!r}")


def _shift_alpha(h: float) -> Expression:
    return parse_expression("t + h", {"h": h})


def build_problem(config: Mapping[str, Any], *, check_span: float = 1000.0,
                  check_points: int = 4001) -> FDEProblem:
    """Build and validate an equation from a plain mapping.

    Keys: ``p``, ``t0``, ``terms`` (each with ``q`` and ``alpha`` or ``h``,
    optionally ``a0``), and optionally ``form`` and ``params``. Positivity of
    ``p`` is spot-checked on ``check_points`` samples of ``[t0, t0 + check_span]``.
    """
    params = dict(config.get("params") or {})
    for key in ("p", "t0"):
        if key not in config:
            raise ProblemError(f"missing required key {key!r}")
    form = config.get("form", "VariableCoeff")
    if form not in FORMS:
        raise ProblemError(f"form must be one of {FORMS}, got {form!r}")
    t0 = _number(config["t0"], params, "t0")
    p = _coefficient(config["p"], params, "p")
    raw_terms = list(config.get("terms") or [])
    if not raw_terms:
        raise EmptyTerms()

    terms = []
    for i, raw in enumerate(raw_terms):
        what = f"term {i + 1}"
        if "q" not in raw:
            raise ProblemError(f"{what}: missing 'q'")
        q = _coefficient(raw["q"], params, f"{what} q")
        h = _number(raw["h"], params, f"{what} h") if raw.get("h") is not None else None
        if form == "ConstantShift" and h is None:
            raise ProblemError(f"{what}: ConstantShift form needs a shift 'h'")
        if raw.get("alpha") is not None and h is None:
            alpha = _coefficient(raw["alpha"], params, f"{what} alpha")
        elif h is not None:
            alpha = _shift_alpha(h)
        else:
            raise ProblemError(f"{what}: needs 'alpha' or 'h'")
        a0 = _number(raw["a0"], params, f"{what} a0") if raw.get("a0") is not None else None
        if a0 is not None and a0 < 0:
            raise ProblemError(f"{what}: a0 must be nonnegative")
        terms.append(Term(q, alpha, a0, h))

    grid = np.linspace(t0, t0 + check_span, check_points)
    pv = np.asarray(p(grid), dtype=float)
    bad = np.flatnonzero(~(pv > 0))
    if bad.size:
        i = int(bad[0])
        raise NonpositiveWeight(float(grid[i]), float(pv[i]))
    return FDEProblem(p, tuple(terms), t0, form)


def sample_grid(start: float, stop: float, step: float) -> np.ndarray:
    """Uniform samples ``start, start + step, ...`` always ending exactly at ``stop``."""
    n = int(math.floor((stop - start) / step + 1e-9))
    grid = start + step * np.arange(n + 1)
    if grid[-1] < stop:
        grid = np.append(grid, stop)
    return grid


def sum_of(coeffs: Sequence[Callable]) -> Callable:
    """Pointwise sum of coefficient functions, accepting scalars or arrays."""
    coeffs = tuple(coeffs)

    def f(t):
        if isinstance(t, np.ndarray):
            out = np.zeros_like(t, dtype=float)
            for c in coeffs:
                out = out + np.asarray(c(t), dtype=float)
            return out
        return float(sum(c(t) for c in coeffs))

    return f


def reciprocal(p: Callable) -> Callable:
    def f(t):
        v = p(t)
        return 1.0 / np.asarray(v, dtype=float) if isinstance(t, np.ndarray) else 1.0 / v

    return f


@dataclass(frozen=True)
class TermClassification:
    omega_plus: dict[int, float]
    omega_minus: dict[int, float]
    unclassified: tuple[int, ...]
    horizon: float
    base_point: float
    grid_step: float
    exact: bool = False
    onset_limit: float = math.inf

    @property
    def minus_only(self) -> list[int]:
        """Indices in the retarded set but not the advanced one."""
        return sorted(set(self.omega_minus) - set(self.omega_plus))

    def as_dict(self) -> dict:
        return {
            "omega_plus": {str(k + 1): v for k, v in sorted(self.omega_plus.items())},
            "omega_minus": {str(k + 1): v for k, v in sorted(self.omega_minus.items())},
            "unclassified": [k + 1 for k in self.unclassified],
            "horizon": self.horizon,
            "base_point": self.base_point,
            "certificate": {
                "grid_step": self.grid_step,
                "exact": self.exact,
                "onset_limit": self.onset_limit,
            },
        }


def _onset(ok: np.ndarray, grid: np.ndarray) -> float | None:
    bad = np.flatnonzero(~ok)
    if bad.size == 0:
        return float(grid[0])
    last = int(bad[-1])
    if last == grid.size - 1:
        return None
    return float(grid[last + 1])


def classify_terms(problem: FDEProblem, horizon: float, grid_step: float) -> TermClassification:
    """Sort terms into advanced / retarded sets by sampling ``alpha_k(t) - t``.

    A term joins a set when the inequality holds from its onset through the
    horizon and the onset lies in the first half of ``[t0, horizon]``; a sign
    pattern that only settles in the last half is too weak to call.
    """
    t0 = problem.t0
    if not horizon > t0:
        raise ValueError("horizon must exceed t0")
    if not grid_step > 0:
        raise ValueError("grid_step must be positive")

    if problem.form == "ConstantShift":
        plus = {k: t0 for k, term in enumerate(problem.terms) if term.shift >= 0}
        minus = {k: t0 for k, term in enumerate(problem.terms) if term.shift <= 0}
        base = min(t0, t0 + min(term.shift for term in problem.terms))
        return TermClassification(plus, minus, (), float(horizon), float(base), float(grid_step), True)

    grid = sample_grid(t0, horizon, grid_step)
    limit = t0 + 0.5 * (horizon - t0)
    tol = 1e-12 * (1.0 + np.abs(grid))
    plus: dict[int, float] = {}
    minus: dict[int, float] = {}
    rest = []
    base = t0
    for k, term in enumerate(problem.terms):
        a = np.asarray(term.alpha(grid), dtype=float)
        base = min(base, float(a.min()))
        d = a - grid
        on_plus = _onset(d >= -tol, grid)
        on_minus = _onset(d <= tol, grid)
        if on_plus is not None and on_plus <= limit:
            plus[k] = on_plus
        if on_minus is not None and on_minus <= limit:
            minus[k] = on_minus
        if k not in plus and k not in minus:
            rest.append(k)
    return TermClassification(plus, minus, tuple(rest), float(horizon), float(base), float(grid_step),
                              False, float(limit))


@dataclass
class Condition:
    name: str
    status: str  # Holds | Fails | Inconclusive
    witness: dict | None = None
    detail: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.status == "Holds"

    def as_dict(self) -> dict:
        return {"status": self.status, "witness": self.witness, "detail": self.detail}


@dataclass
class ConditionReport:
    A: Condition
    B: Condition
    C: Condition
    D: Condition
    E: Condition
    integrals: dict[str, ImproperVerdict] = field(default_factory=dict)

    def __getitem__(self, name: str) -> Condition:
        return getattr(self, name)

    def as_dict(self) -> dict:
        return {name: self[name].as_dict() for name in "ABCDE"}


def _check_nonnegative(problem: FDEProblem, grid: np.ndarray) -> Condition:
    first = None
    for k, term in enumerate(problem.terms):
        q = np.asarray(term.q(grid), dtype=float)
        neg = np.flatnonzero(q < 0)
        if neg.size == 0:
            continue
        start = int(neg[0])
        stop = start
        while stop + 1 < q.size and q[stop + 1] < 0:
            stop += 1
        i = start + int(np.argmin(q[start:stop + 1]))
        if first is None or grid[start] < first[0]:
            first = (float(grid[start]), k, float(grid[i]), float(q[i]))
    detail = {"samples": int(grid.size), "window": [float(grid[0]), float(grid[-1])]}
    if first is None:
        return Condition("A", "Holds", None, detail)
    _, k, t, v = first
    return Condition("A", "Fails", {"t": t, "k": k + 1, "q": v}, detail)


def _check_unbounded(problem: FDEProblem, policy: ImproperPolicy, windows: int) -> Condition:
    h0 = max(problem.t0, 1.0)
    per_term = {}
    status = "Holds"
    witness = None
    for k, term in enumerate(problem.terms):
        edges, mins = [], []
        note = None
        for j in range(1, windows + 1):
            lo, hi = h0 * 2.0 ** (j - 1), h0 * 2.0 ** j
            try:
                a = np.asarray(term.alpha(np.linspace(lo, hi, 65)), dtype=float)
            except DomainError as exc:
                note = f"sequence truncated at H = {hi:.6g}: {exc}"
                break
            edges.append(hi)
            mins.append(float(a.min()))
        v = classify_sequence(edges, mins, policy) if len(mins) >= 2 else None
        kind = v.kind if v is not None else "Inconclusive"
        per_term[str(k + 1)] = {
            "kind": kind,
            "last_min": mins[-1] if mins else None,
            "last_H": edges[-1] if edges else None,
            "reason": v.reason if v is not None else note,
            "note": note,
        }
        if kind == "Convergent" and status != "Fails":
            status = "Fails"
            witness = {"k": k + 1, "limit": v.value}
        elif kind != "Divergent" and status == "Holds":
            status = "Inconclusive"
    return Condition("B", status, witness, {"terms": per_term})


def _integral_condition(name: str, verdict: ImproperVerdict, want: str) -> Condition:
    detail = verdict.evidence()
    if verdict.kind == want:
        return Condition(name, "Holds", None, detail)
    if verdict.kind == "Inconclusive":
        return Condition(name, "Inconclusive", None, detail)
    if verdict.kind == "Convergent":
        witness = {"value": verdict.value, "tail_bound": verdict.tail_bound}
    else:
        witness = {"partial_sum": verdict.partial_sums[-1], "t": verdict.edges[-1]}
    return Condition(name, "Fails", witness, detail)


def evaluate_conditions(problem: FDEProblem, classification: TermClassification,
                        quad_policy: ImproperPolicy | None = None, *, b_windows: int = 40) -> ConditionReport:
    """Assign each of conditions A-E a status with numeric evidence."""
    policy = quad_policy or ImproperPolicy()
    t0 = problem.t0
    grid = sample_grid(t0, classification.horizon, classification.grid_step)

    cond_a = _check_nonnegative(problem, grid)
    cond_b = _check_unbounded(problem, policy, b_windows)

    v_c = classify_improper(reciprocal(problem.p), t0, policy)
    cond_c = _integral_condition("C", v_c, "Divergent")

    plus = sorted(classification.omega_plus)
    if plus:
        v_d = classify_improper(sum_of(problem.terms[k].q for k in plus), t0, policy)
    else:
        v_d = ImproperVerdict("Convergent", 0.0, 0.0, "advanced set is empty", [t0], [], [])
    cond_d = _integral_condition("D", v_d, "Convergent")

    v_e = classify_improper(sum_of(term.q for term in problem.terms), t0, policy)
    cond_e = _integral_condition("E", v_e, "Divergent")

    return ConditionReport(cond_a, cond_b, cond_c, cond_d, cond_e, {"C": v_c, "D": v_d, "E": v_e})
