"""Comparison potentials and the oscillation criteria built on them.

Every criterion is a sufficient condition: a failed hypothesis yields
``CriterionNotApplicable`` or ``Inconclusive``, never a non-oscillation claim
about the deviated equation itself.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize_scalar

from .expr import Expression
from .odeosc import (
    ComparisonODE,
    OscillationVerdict,
    OscPolicy,
    StepPolicy,
    is_oscillatory_at_infinity,
    is_oscillatory_on_interval,
)
from .problem import (
    ConditionReport,
    FDEProblem,
    TermClassification,
    evaluate_conditions,
    reciprocal,
    sum_of,
)
from .quadrature import (
    CumulativeIntegral,
    ImproperPolicy,
    TailIntegral,
    integrate,
    tail_integral_direct,
    vectorize,
)

__all__ = [
    "EmptyOmegaSet",
    "ConditionDFailed",
    "WeightOutOfRange",
    "OrderingViolated",
    "CriterionVerdict",
    "IntervalClassification",
    "potential_base",
    "potential_advanced_weighted",
    "potential_mixed",
    "theorem_2_2",
    "theorem_2_3",
    "theorem_2_4",
    "theorem_2_5",
    "corollary_2_1",
    "interval_data",
    "theorem_2_6",
    "remark_2_1_scan",
    "DEFAULT_EPS_SWEEP",
]

DEFAULT_EPS_SWEEP = (0.5, 0.25, 0.125)
_SAMPLES = 2001


class EmptyOmegaSet(ValueError):
    pass


class ConditionDFailed(ValueError):
    pass


class WeightOutOfRange(ValueError):
    pass


class OrderingViolated(ValueError):
    pass


@dataclass
class CriterionVerdict:
    theorem: str
    conclusion: str  # OscillatoryByCriterion | CriterionNotApplicable | Inconclusive
    condition_report: ConditionReport | None = None
    hypotheses: tuple[str, ...] = ()
    sub_verdicts: list[tuple[str, OscillationVerdict]] = field(default_factory=list)
    parameters: dict = field(default_factory=dict)
    failed: dict | None = None
    warnings: list[str] = field(default_factory=list)

    @property
    def oscillatory(self) -> bool:
        return self.conclusion == "OscillatoryByCriterion"

    def as_dict(self) -> dict:
        out = {
            "theorem": self.theorem,
            "conclusion": self.conclusion,
            "statement": _STATEMENTS[self.conclusion],
            "hypotheses": list(self.hypotheses),
            "failed": self.failed,
            "parameters": self.parameters,
            "sub_verdicts": [{"equation": name, **v.as_dict()} for name, v in self.sub_verdicts],
            "warnings": list(self.warnings),
        }
        if self.condition_report is not None:
            out["conditions"] = {k: self.condition_report[k].status for k in self.hypotheses if k in "ABCDE"}
        return out


_STATEMENTS = {
    "OscillatoryByCriterion": "criterion hypotheses verified numerically; the criterion then gives oscillation",
    "CriterionNotApplicable": "a hypothesis of the criterion fails numerically; no conclusion",
    "Inconclusive": "hypotheses could not be settled numerically; no conclusion",
}


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _unit_weight(p) -> bool:
    if isinstance(p, Expression) and p.is_constant:
        return p.evaluate(0.0) == 1.0
    return False


def _make_ode(problem: FDEProblem, Q: Callable, start: float, label: str, notes=()) -> ComparisonODE:
    if _unit_weight(problem.p):
        return ComparisonODE.with_unit_weight(Q, start, label, tuple(notes))
    return ComparisonODE(problem.p, Q, start, False, label, tuple(notes))


def _dropped_warning(classification: TermClassification) -> list[str]:
    if not classification.unclassified:
        return []
    ks = ", ".join(str(k + 1) for k in classification.unclassified)
    return [f"unclassified terms dropped from every comparison potential: {ks}"]


def _conditions(problem, classification, conditions, quad_policy) -> ConditionReport:
    return conditions if conditions is not None else evaluate_conditions(problem, classification, quad_policy)


def _gate(theorem: str, report: ConditionReport, names: Sequence[str], warnings: list[str]):
    """First hypothesis that is not ``Holds`` decides a negative verdict."""
    for name in names:
        c = report[name]
        if c.status == "Fails":
            return CriterionVerdict(theorem, "CriterionNotApplicable", report, tuple(names),
                                    failed={"hypothesis": name, "witness": c.witness}, warnings=warnings)
    for name in names:
        c = report[name]
        if c.status == "Inconclusive":
            return CriterionVerdict(theorem, "Inconclusive", report, tuple(names),
                                    failed={"hypothesis": name, "status": "Inconclusive"}, warnings=warnings)
    return None


def _from_sub_verdicts(theorem, report, hypotheses, subs, parameters, warnings) -> CriterionVerdict:
    for name, v in subs:
        if v.kind == "NonOscillatory":
            return CriterionVerdict(theorem, "CriterionNotApplicable", report, hypotheses, subs, parameters,
                                    {"hypothesis": f"{name} oscillatory", "sub_verdict": v.kind, "test": v.test},
                                    warnings)
    for name, v in subs:
        if v.kind != "Oscillatory":
            return CriterionVerdict(theorem, "Inconclusive", report, hypotheses, subs, parameters,
                                    {"hypothesis": f"{name} oscillatory", "sub_verdict": v.kind}, warnings)
    counted = [name for name, v in subs if not v.analytic and v.test == "PruferCount"]
    if counted:
        warnings = warnings + [f"oscillation of {', '.join(counted)} rests on zero counts over a finite range"]
    return CriterionVerdict(theorem, "OscillatoryByCriterion", report, hypotheses, subs, parameters, None, warnings)


class _Primitive:
    """``P(x) = int_{x0}^x 1/p``; exact for ``p = 1``, tabulated otherwise."""

    def __init__(self, p, lo: float, hi: float):
        self.unit = _unit_weight(p)
        self.p = p
        self.lo, self.hi = lo, hi
        self.table = None if self.unit else CumulativeIntegral(reciprocal(p), lo, hi, 4001, stretched=True)

    def __call__(self, x):
        if self.unit:
            return x
        if isinstance(x, np.ndarray):
            inside = (x >= self.lo) & (x <= self.hi)
            if inside.all():
                return self.table(x)
            return np.array([self(float(v)) for v in x])
        if self.lo <= x <= self.hi:
            return self.table(x)
        edge = self.lo if x < self.lo else self.hi
        return self.table(edge) + integrate(reciprocal(self.p), edge, x, 1e-12).value


# ---------------------------------------------------------------------------
# comparison potentials
# ---------------------------------------------------------------------------


def potential_base(problem: FDEProblem, classification: TermClassification, sign: str) -> ComparisonODE:
    """``Q = sum of q_k`` over the advanced (``sign='plus'``) or retarded set."""
    if sign not in ("plus", "minus"):
        raise ValueError("sign must be 'plus' or 'minus'")
    members = classification.omega_plus if sign == "plus" else classification.omega_minus
    if not members:
        raise EmptyOmegaSet(f"no {'advanced' if sign == 'plus' else 'retarded'} terms")
    ks = sorted(members)
    start = max(problem.t0, max(members.values()))
    Q = sum_of(problem.terms[k].q for k in ks)
    name = "advanced-plain" if sign == "plus" else "retarded-plain"
    return _make_ode(problem, Q, start, name, _dropped_warning(classification))


class _AdvancedWeighted:
    """``sum_{k in plus} q_k(t) exp(int_t^{alpha_k(t)} R/p)`` with ``R`` the tail
    integral of the advanced coefficients."""

    def __init__(self, problem: FDEProblem, ks: Sequence[int], tail: Callable, lo: float, hi: float,
                 table: bool):
        self.q = [problem.terms[k].q for k in ks]
        self.alpha = [problem.terms[k].alpha for k in ks]
        self.tail = tail
        self.p = problem.p
        self.lo, self.hi = lo, hi
        self.integrand = lambda tau: np.asarray(tail(tau)) / np.asarray(problem.p(tau))
        self.G = CumulativeIntegral(self.integrand, lo, hi, 4001, stretched=True) if table else None

    def exponent(self, t: float, a: float) -> float:
        if self.G is not None and self.lo <= t <= self.hi and self.lo <= a <= self.hi:
            return float(self.G(a) - self.G(t))
        return integrate(self.integrand, t, a, 1e-10).value if a != t else 0.0

    def __call__(self, t):
        if isinstance(t, np.ndarray):
            return np.array([self(float(x)) for x in t.ravel()]).reshape(t.shape)
        total = 0.0
        for q, al in zip(self.q, self.alpha):
            qv = q(t)
            if qv != 0.0:
                total += qv * math.exp(self.exponent(t, al(t)))
        return total


def _advanced_part(problem, classification, quad_policy, conditions, cached=True):
    ks = sorted(classification.omega_plus)
    report = conditions
    verdict = report.integrals.get("D") if report is not None else None
    if verdict is None:
        report = evaluate_conditions(problem, classification, quad_policy)
        verdict = report.integrals["D"]
    if report.D.status != "Holds":
        raise ConditionDFailed(f"condition D is {report.D.status}")
    f = sum_of(problem.terms[k].q for k in ks)
    start = max(problem.t0, max(classification.omega_plus.values()))
    if cached:
        tail = TailIntegral(f, problem.t0, verdict)
        hi = tail.b
    else:
        def tail(tau):
            if isinstance(tau, np.ndarray):
                return np.array([tail_integral_direct(f, float(x), quad_policy) for x in tau.ravel()]).reshape(tau.shape)
            return tail_integral_direct(f, tau, quad_policy)
        hi = start + 1.0
    return _AdvancedWeighted(problem, ks, tail, problem.t0, hi, cached), start


def potential_advanced_weighted(problem: FDEProblem, classification: TermClassification,
                                quad_policy: ImproperPolicy | None = None, *,
                                conditions: ConditionReport | None = None, cached: bool = True) -> ComparisonODE:
    """Advanced coefficients amplified by ``exp(int_t^{alpha_k} R/p)``.

    ``cached=False`` evaluates every tail integral directly; it is slow and
    meant for cross-checking the cached tables.
    """
    if not classification.omega_plus:
        raise EmptyOmegaSet("no advanced terms")
    Q, start = _advanced_part(problem, classification, quad_policy, conditions, cached)
    return _make_ode(problem, Q, start, "advanced-tail-weighted", _dropped_warning(classification))


class _RetardedRatio:
    def __init__(self, problem, ks, base, weights, primitive):
        self.q = [problem.terms[k].q for k in ks]
        self.alpha = [problem.terms[k].alpha for k in ks]
        self.w = [weights.get(k, 1.0) for k in ks]
        self.base = base
        self.P = primitive
        self.Pb = primitive(base)

    def __call__(self, t):
        if isinstance(t, np.ndarray):
            return np.array([self(float(x)) for x in t.ravel()]).reshape(t.shape)
        den = self.P(t) - self.Pb
        if den <= 0:
            return 0.0
        total = 0.0
        for q, al, w in zip(self.q, self.alpha, self.w):
            ratio = (self.P(al(t)) - self.Pb) / den
            total += w * q(t) * min(max(ratio, 0.0), 1.0)
        return total


def _weights(l, ks) -> dict[int, float]:
    if l is None:
        return {}
    if isinstance(l, Mapping):
        w = {int(k): float(v) for k, v in l.items()}
    elif isinstance(l, (int, float)):
        w = {k: float(l) for k in ks}
    else:
        w = dict(zip(ks, (float(v) for v in l)))
    for k in ks:
        if k not in w:
            raise WeightOutOfRange(f"no weight given for term {k + 1}")
        if not 0.0 < w[k] < 1.0:
            raise WeightOutOfRange(f"weight for term {k + 1} is {w[k]!r}, outside (0, 1)")
    return w


def potential_mixed(problem: FDEProblem, classification: TermClassification, t1: float,
                    l=None, quad_policy: ImproperPolicy | None = None, *,
                    conditions: ConditionReport | None = None) -> ComparisonODE:
    """Advanced part as in :func:`potential_advanced_weighted` plus retarded
    terms scaled by ``(P(alpha_k) - P(t1)) / (P(t) - P(t1))`` with ``P = int 1/p``.

    With weights ``l`` (each in (0, 1)) the retarded terms are also multiplied
    by ``l_k``; pass ``t1 = t0`` for the weighted single-base form.
    """
    plus = sorted(classification.omega_plus)
    minus = classification.minus_only
    if not plus and not minus:
        raise EmptyOmegaSet("no classified terms")
    weights = _weights(l, minus)
    warnings = _dropped_warning(classification)
    parts = []
    start = max(problem.t0, t1)
    if plus:
        adv, s = _advanced_part(problem, classification, quad_policy, conditions)
        parts.append(adv)
        start = max(start, s)
    if minus:
        lo = min(classification.base_point, t1)
        prim = _Primitive(problem.p, lo, max(classification.horizon, t1 + 1.0))
        parts.append(_RetardedRatio(problem, minus, t1, weights, prim))
        start = max(start, max(classification.omega_minus[k] for k in minus))
        grid = np.linspace(max(t1, problem.t0), classification.horizon, _SAMPLES)
        for k in minus:
            a = np.asarray(problem.terms[k].alpha(grid), dtype=float)
            below = grid[(a < t1) & (grid > t1)]
            if below.size:
                warnings.append(f"term {k + 1}: alpha(t) < t1 = {t1:g} for sampled t in "
                                f"[{below[0]:.6g}, {below[-1]:.6g}]; its ratio is set to 0 there")

    def Q(t):
        if isinstance(t, np.ndarray):
            return sum(np.asarray(part(t), dtype=float) for part in parts)
        return float(sum(part(t) for part in parts))

    # the ratio is singular at t1 itself
    start = max(start, t1 + 1.0)
    label = "mixed-weighted" if l is not None else "mixed"
    return _make_ode(problem, Q, start, label, warnings)


# ---------------------------------------------------------------------------
# criteria at infinity
# ---------------------------------------------------------------------------


def theorem_2_2(problem: FDEProblem, classification: TermClassification, osc_policy: OscPolicy | None = None,
                *, conditions: ConditionReport | None = None,
                quad_policy: ImproperPolicy | None = None) -> CriterionVerdict:
    """Both plain comparison equations oscillatory, plus A and B."""
    th = "T2_2"
    report = _conditions(problem, classification, conditions, quad_policy)
    warnings = _dropped_warning(classification)
    hyp = ("A", "B")
    gated = _gate(th, report, hyp, warnings)
    if gated:
        return gated
    for sign, members in (("plus", classification.omega_plus), ("minus", classification.omega_minus)):
        if not members:
            return CriterionVerdict(th, "CriterionNotApplicable", report, hyp,
                                    failed={"hypothesis": f"omega_{sign} nonempty"}, warnings=warnings)
    subs = []
    for sign in ("plus", "minus"):
        ode = potential_base(problem, classification, sign)
        subs.append((ode.label, is_oscillatory_at_infinity(ode, osc_policy)))
    return _from_sub_verdicts(th, report, hyp, subs, {}, warnings)


def theorem_2_3(problem: FDEProblem, classification: TermClassification, osc_policy: OscPolicy | None = None,
                *, conditions: ConditionReport | None = None,
                quad_policy: ImproperPolicy | None = None) -> CriterionVerdict:
    """Retarded plain equation and the tail-weighted advanced equation both
    oscillatory, plus A, B and D."""
    th = "T2_3"
    report = _conditions(problem, classification, conditions, quad_policy)
    warnings = _dropped_warning(classification)
    hyp = ("A", "B", "D")
    gated = _gate(th, report, hyp, warnings)
    if gated:
        return gated
    for sign, members in (("plus", classification.omega_plus), ("minus", classification.omega_minus)):
        if not members:
            return CriterionVerdict(th, "CriterionNotApplicable", report, hyp,
                                    failed={"hypothesis": f"omega_{sign} nonempty"}, warnings=warnings)
    minus = potential_base(problem, classification, "minus")
    adv = potential_advanced_weighted(problem, classification, quad_policy, conditions=report)
    subs = [(minus.label, is_oscillatory_at_infinity(minus, osc_policy)),
            (adv.label, is_oscillatory_at_infinity(adv, osc_policy))]
    return _from_sub_verdicts(th, report, hyp, subs, {}, warnings)


def theorem_2_4(problem: FDEProblem, classification: TermClassification,
                quad_policy: ImproperPolicy | None = None, *, conditions: ConditionReport | None = None,
                use_c_prime: bool = False, osc_policy: OscPolicy | None = None) -> CriterionVerdict:
    """A, B, C and divergence of the summed coefficients (E).

    ``use_c_prime`` replaces C with oscillation of the retarded plain equation.
    """
    th = "T2_4"
    report = _conditions(problem, classification, conditions, quad_policy)
    warnings = _dropped_warning(classification)
    if not use_c_prime:
        hyp = ("A", "B", "C", "E")
        gated = _gate(th, report, hyp, warnings)
        return gated or CriterionVerdict(th, "OscillatoryByCriterion", report, hyp, warnings=warnings)
    hyp = ("A", "B", "E")
    gated = _gate(th, report, hyp, warnings)
    if gated:
        return gated
    if not classification.omega_minus:
        return CriterionVerdict(th, "CriterionNotApplicable", report, hyp + ("C'",),
                                failed={"hypothesis": "omega_minus nonempty"}, warnings=warnings)
    minus = potential_base(problem, classification, "minus")
    subs = [(minus.label, is_oscillatory_at_infinity(minus, osc_policy))]
    return _from_sub_verdicts(th, report, hyp + ("C'",), subs, {"variant": "C replaced by C'"}, warnings)


def _sweep_sub_verdicts(problem, classification, bases, l, osc_policy, quad_policy, report, jobs):
    def one(t1):
        ode = potential_mixed(problem, classification, t1, l, quad_policy, conditions=report)
        return ode, is_oscillatory_at_infinity(ode, osc_policy)

    if jobs > 1 and len(bases) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(one, bases))
    return [one(t1) for t1 in bases]


def theorem_2_5(problem: FDEProblem, classification: TermClassification, t1_samples: Sequence[float] | None = None,
                osc_policy: OscPolicy | None = None, *, conditions: ConditionReport | None = None,
                quad_policy: ImproperPolicy | None = None, jobs: int = 1) -> CriterionVerdict:
    """The mixed comparison equation oscillatory for every sampled base ``t1``,
    plus A-D."""
    th = "T2_5"
    t0 = problem.t0
    bases = list(t1_samples) if t1_samples is not None else [t0 + 1.0, t0 + 5.0, t0 + 25.0]
    report = _conditions(problem, classification, conditions, quad_policy)
    warnings = _dropped_warning(classification)
    hyp = ("A", "B", "C", "D")
    gated = _gate(th, report, hyp, warnings)
    if gated:
        return gated
    if not classification.omega_plus and not classification.minus_only:
        return CriterionVerdict(th, "CriterionNotApplicable", report, hyp,
                                failed={"hypothesis": "omega_minus or omega_plus nonempty"}, warnings=warnings)
    params = {"t1_samples": bases,
              "sweep_note": "every t1 >= t0 is replaced by the finite sample list"}
    subs = []
    for t1, (ode, v) in zip(bases, _sweep_sub_verdicts(problem, classification, bases, None, osc_policy,
                                                       quad_policy, report, jobs)):
        subs.append((f"{ode.label} t1={t1:g}", v))
        warnings.extend(w for w in ode.notes if w not in warnings)
    return _from_sub_verdicts(th, report, hyp, subs, params, warnings)


def corollary_2_1(problem: FDEProblem, classification: TermClassification, l,
                  osc_policy: OscPolicy | None = None, *, conditions: ConditionReport | None = None,
                  quad_policy: ImproperPolicy | None = None) -> CriterionVerdict:
    """The weighted mixed equation with base ``t0`` oscillatory, plus A-D."""
    th = "C2_1"
    weights = _weights(l, classification.minus_only)
    report = _conditions(problem, classification, conditions, quad_policy)
    warnings = _dropped_warning(classification)
    hyp = ("A", "B", "C", "D")
    gated = _gate(th, report, hyp, warnings)
    if gated:
        return gated
    if not classification.omega_plus and not classification.minus_only:
        return CriterionVerdict(th, "CriterionNotApplicable", report, hyp,
                                failed={"hypothesis": "omega_minus or omega_plus nonempty"}, warnings=warnings)
    ode = potential_mixed(problem, classification, problem.t0, weights or None, quad_policy, conditions=report)
    warnings.extend(w for w in ode.notes if w not in warnings)
    params = {"weights": {str(k + 1): v for k, v in weights.items()}}
    return _from_sub_verdicts(th, report, hyp, [(ode.label, is_oscillatory_at_infinity(ode, osc_policy))],
                              params, warnings)


# ---------------------------------------------------------------------------
# criteria on a segment
# ---------------------------------------------------------------------------


@dataclass
class IntervalClassification:
    t1: float
    t2: float
    t3: float
    t4: float
    omega_plus_w: tuple[int, ...]
    omega_1_minus: tuple[int, ...]
    omega_2_minus: tuple[int, ...]
    T1: float
    T2: float
    t2_plus: float
    t3_minus: float

    def as_dict(self) -> dict:
        return {
            "t": [self.t1, self.t2, self.t3, self.t4],
            "omega_plus": [k + 1 for k in self.omega_plus_w],
            "omega_1_minus": [k + 1 for k in self.omega_1_minus],
            "omega_2_minus": [k + 1 for k in self.omega_2_minus],
            "T1": self.T1,
            "T2": self.T2,
            "t2_plus": self.t2_plus,
            "t3_minus": self.t3_minus,
        }


def _extremum(f: Callable, lo: float, hi: float, samples: int, kind: str) -> float:
    """Sampled extremum of ``f`` on ``[lo, hi]`` with one bounded refinement
    around the best sample."""
    grid = np.linspace(lo, hi, samples)
    v = np.asarray(vectorize(f)(grid), dtype=float)
    sgn = 1.0 if kind == "min" else -1.0
    i = int(np.argmin(sgn * v))
    best = float(v[i])
    a, b = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    if b > a:
        r = minimize_scalar(lambda x: sgn * f(x), bounds=(a, b), method="bounded",
                            options={"xatol": 1e-12 * max(1.0, abs(b))})
        cand = sgn * float(r.fun)
        best = min(best, cand) if kind == "min" else max(best, cand)
    return best


def interval_data(problem: FDEProblem, t1: float, t2: float, t3: float, t4: float,
                  samples: int = _SAMPLES) -> IntervalClassification:
    """Index sets and deviation extrema for the segment criterion."""
    if not (t1 < t2 <= t3 < t4):
        raise OrderingViolated(f"need t1 < t2 <= t3 < t4, got {t1!r}, {t2!r}, {t3!r}, {t4!r}")
    g12 = np.linspace(t1, t2, samples)
    g34 = np.linspace(t3, t4, samples)
    tol12 = 1e-12 * (1.0 + np.abs(g12))
    tol34 = 1e-12 * (1.0 + np.abs(g34))
    plus, minus1, minus2 = [], [], []
    for k, term in enumerate(problem.terms):
        a12 = np.asarray(term.alpha(g12), dtype=float)
        a34 = np.asarray(term.alpha(g34), dtype=float)
        if np.all(a12 >= g12 - tol12):
            plus.append(k)
        if np.all(a12 <= g12 + tol12) and np.all(a12 >= t1 - tol12):
            minus1.append(k)
        if np.all(a34 <= g34 + tol34):
            minus2.append(k)
    T1 = min(_extremum(term.alpha, t1, t4, samples, "min") for term in problem.terms)
    T2 = max(_extremum(term.alpha, t1, t4, samples, "max") for term in problem.terms)
    # an empty advanced set leaves nothing past t2
    t2p = max((_extremum(problem.terms[k].alpha, t1, t2, samples, "max") for k in plus), default=t2)
    t3m = min((_extremum(problem.terms[k].alpha, t3, t4, samples, "min") for k in minus2), default=t3)
    return IntervalClassification(t1, t2, t3, t4, tuple(plus), tuple(minus1), tuple(minus2), T1, T2, t2p, t3m)


class _SegmentAdvanced:
    """``sum_{k in plus} q_k(t) exp(int_t^{alpha_k} S/p)``, ``S(tau) = int_tau^{t2} sum q``."""

    def __init__(self, problem, ks, lo, hi, t2):
        self.q = [problem.terms[k].q for k in ks]
        self.alpha = [problem.terms[k].alpha for k in ks]
        f = sum_of(self.q)
        C = CumulativeIntegral(f, lo, hi, 2001)
        Ct2 = C(t2)
        p = problem.p
        self.G = CumulativeIntegral(lambda tau: (Ct2 - np.asarray(C(tau))) / np.asarray(p(tau)), lo, hi, 2001)

    def __call__(self, t):
        total = 0.0
        for q, al in zip(self.q, self.alpha):
            total += q(t) * math.exp(float(self.G(al(t)) - self.G(t)))
        return total


class _SegmentRetarded:
    def __init__(self, problem, ks, t1, eps, prim):
        self.q = [problem.terms[k].q for k in ks]
        self.alpha = [problem.terms[k].alpha for k in ks]
        self.eps = eps
        self.P = prim
        self.P1 = prim(t1)

    def __call__(self, t):
        den = self.P(t) - self.P1 + self.eps
        return sum(q(t) * (self.P(al(t)) - self.P1 + self.eps) / den for q, al in zip(self.q, self.alpha))


def theorem_2_6(problem: FDEProblem, t1: float, t2: float, t3: float, t4: float,
                eps_sweep: Sequence[float] = DEFAULT_EPS_SWEEP, step_policy: StepPolicy | None = None, *,
                samples: int = _SAMPLES, b_tol: float = 1e-9) -> CriterionVerdict:
    """Oscillation on ``[T1, T2]`` from hypotheses a)-d) on the four points."""
    th = "T2_6"
    data = interval_data(problem, t1, t2, t3, t4, samples)
    if not (data.omega_plus_w or data.omega_1_minus):
        raise EmptyOmegaSet("no advanced or admissible retarded terms on [t1, t2]")
    if not data.omega_2_minus:
        raise EmptyOmegaSet("no retarded terms on [t3, t4]")
    hyp = ("a", "b", "c", "d")
    params = {"interval": data.as_dict(), "eps_sweep": list(eps_sweep),
              "sweep_note": "every eps in (0, eps0) is replaced by the finite sweep",
              "conclusion_segment": [data.T1, data.T2]}

    grid = np.linspace(data.T1, data.T2, samples)
    for k, term in enumerate(problem.terms):
        q = np.asarray(term.q(grid), dtype=float)
        neg = np.flatnonzero(q < 0)
        if neg.size:
            i = int(neg[0])
            return CriterionVerdict(th, "CriterionNotApplicable", None, hyp, parameters=params,
                                    failed={"hypothesis": "a", "witness": {"t": float(grid[i]), "k": k + 1,
                                                                            "q": float(q[i])}})
    scale = max(1.0, abs(data.t2_plus), abs(data.t3_minus))
    if data.t2_plus > data.t3_minus + b_tol * scale:
        return CriterionVerdict(th, "CriterionNotApplicable", None, hyp, parameters=params,
                                failed={"hypothesis": "b", "witness": {"t2_plus": data.t2_plus,
                                                                        "t3_minus": data.t3_minus}})

    subs = []
    lo = min(data.T1, t1)
    hi = max(data.T2, data.t2_plus, t2)
    prim = _Primitive(problem.p, lo, hi)
    adv = _SegmentAdvanced(problem, data.omega_plus_w, lo, hi, t2) if data.omega_plus_w else None
    for eps in eps_sweep:
        parts = []
        if adv is not None:
            parts.append(adv)
        if data.omega_1_minus:
            parts.append(_SegmentRetarded(problem, data.omega_1_minus, t1, eps, prim))

        def Q(t, parts=parts):
            return float(sum(part(t) for part in parts))

        ode = ComparisonODE(problem.p, Q, t1, _unit_weight(problem.p), f"segment-mixed eps={eps:g}")
        subs.append((ode.label, is_oscillatory_on_interval(ode, t1, t2, step_policy)))
    q2 = sum_of(problem.terms[k].q for k in data.omega_2_minus)
    ode = ComparisonODE(problem.p, q2, t3, _unit_weight(problem.p), "segment-retarded")
    subs.append((ode.label, is_oscillatory_on_interval(ode, t3, t4, step_policy)))
    return _from_sub_verdicts(th, None, hyp, subs, params, [])


def remark_2_1_scan(problem: FDEProblem, windows: Sequence[Mapping], eps_sweep: Sequence[float] = DEFAULT_EPS_SWEEP,
                    step_policy: StepPolicy | None = None, *, jobs: int = 1) -> CriterionVerdict:
    """Apply the segment criterion on each window ``{'L': (L_a, L_b), 't': (t1, t2, t3, t4)}``.

    Every window must pass and keep its conclusion segment inside ``[L_a, L_b]``;
    one failing window leaves the scan Inconclusive (the criterion is only sufficient).
    """
    th = "R2_1"
    if not windows:
        return CriterionVerdict(th, "Inconclusive", None, ("windows",), failed={"hypothesis": "windows nonempty"})
    ends = [float(x) for w in windows for x in w["L"]]
    if any(b <= a for a, b in zip(ends, ends[1:])):
        return CriterionVerdict(th, "Inconclusive", None, ("windows",),
                                failed={"hypothesis": "window endpoints strictly increasing", "endpoints": ends})

    def one(w):
        La, Lb = (float(x) for x in w["L"])
        ts = [float(x) for x in w["t"]]
        try:
            v = theorem_2_6(problem, *ts, eps_sweep=eps_sweep, step_policy=step_policy)
        except (EmptyOmegaSet, OrderingViolated) as exc:
            return {"L": [La, Lb], "t": ts, "conclusion": "CriterionNotApplicable", "error": str(exc)}, False
        T1, T2 = v.parameters["interval"]["T1"], v.parameters["interval"]["T2"]
        inside = La <= T1 and T2 <= Lb
        rec = {"L": [La, Lb], "t": ts, "conclusion": v.conclusion, "T1": T1, "T2": T2,
               "inside_window": inside, "verdict": v.as_dict()}
        return rec, v.oscillatory and inside

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, windows))
    else:
        results = [one(w) for w in windows]
    records = [r for r, _ in results]
    params = {"windows": records, "note": "finitely many windows stand in for the whole unbounded sequence"}
    failing = [i for i, (_, ok) in enumerate(results) if not ok]
    if failing:
        return CriterionVerdict(th, "Inconclusive", None, ("windows",), parameters=params,
                                failed={"hypothesis": "segment criterion on every window",
                                        "windows": [i + 1 for i in failing]})
    return CriterionVerdict(th, "OscillatoryByCriterion", None, ("windows",), parameters=params)
