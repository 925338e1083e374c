"""Oscillation of ``(p phi')' + Q phi = 0`` on segments and at infinity.

Zeros are counted through the Prüfer angle: with ``phi = r sin(theta)`` and
``p phi' = r cos(theta)`` the angle obeys ``theta' = cos^2/p + Q sin^2`` and
crosses each multiple of pi only upwards, so zeros are exactly those crossings.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .quadrature import ImproperPolicy, classify_improper, vectorize

__all__ = [
    "ComparisonODE",
    "StepPolicy",
    "OscPolicy",
    "PruferState",
    "PruferResult",
    "OscillationVerdict",
    "StiffnessFailure",
    "prufer_advance",
    "is_oscillatory_on_interval",
    "is_oscillatory_at_infinity",
    "log_transformed",
    "write_phase_csv",
]


class StiffnessFailure(ArithmeticError):
    def __init__(self, message: str, t: float):
        super().__init__(f"phase integration failed near t = {t!r}: {message}")
        self.t = t


def _one(t):
    return np.ones_like(t, dtype=float) if isinstance(t, np.ndarray) else 1.0


@dataclass(frozen=True)
class ComparisonODE:
    p: Callable
    Q: Callable
    domain_start: float
    unit_weight: bool = False
    label: str = ""
    notes: tuple[str, ...] = ()

    @classmethod
    def with_unit_weight(cls, Q: Callable, domain_start: float, label: str = "", notes=()) -> "ComparisonODE":
        return cls(_one, Q, domain_start, True, label, tuple(notes))


@dataclass(frozen=True)
class StepPolicy:
    rtol: float = 1e-8
    atol: float = 1e-10
    method: str = "DOP853"
    max_step: float = math.inf


@dataclass(frozen=True)
class PruferState:
    theta: float
    log_r: float
    t: float


@dataclass
class PruferResult:
    theta_final: float
    zero_count: int
    zero_locations: list[float]
    state: PruferState
    t_start: float
    theta_start: float
    capped: bool = False
    sol: object = field(default=None, repr=False)

    @property
    def phase_gain(self) -> float:
        return self.theta_final - self.theta_start


def _rhs(ode: ComparisonODE):
    p, Q = ode.p, ode.Q

    def f(t, y):
        s, c = math.sin(y[0]), math.cos(y[0])
        pv = p(t)
        qv = Q(t)
        return [c * c / pv + qv * s * s, (1.0 / pv - qv) * s * c]

    return f


def prufer_advance(ode: ComparisonODE, t_a: float, t_b: float, theta0: float,
                   step_policy: StepPolicy | None = None, *, phase_cap: float | None = None,
                   log_r0: float = 0.0) -> PruferResult:
    """Integrate the phase from ``t_a`` to ``t_b`` and locate the zeros of ``phi``.

    With ``phase_cap`` the integration stops once ``theta`` reaches it; the
    reported state is then at the stopping time.
    """
    if not t_b > t_a:
        raise ValueError("need t_a < t_b")
    sp = step_policy or StepPolicy()
    events = None
    if phase_cap is not None:
        def hit(t, y):
            return y[0] - phase_cap
        hit.terminal = True
        hit.direction = 1
        events = [hit]
    sol = solve_ivp(_rhs(ode), (t_a, t_b), [theta0, log_r0], method=sp.method, rtol=sp.rtol,
                    atol=sp.atol, max_step=sp.max_step, dense_output=True, events=events)
    if sol.status == -1:
        raise StiffnessFailure(sol.message, float(sol.t[-1]))
    ts, th = sol.t, sol.y[0]
    theta_end = float(th[-1])
    capped = sol.status == 1
    k_lo = math.floor(theta0 / math.pi)
    k_hi = math.floor(theta_end / math.pi)
    zeros = []
    for k in range(k_lo + 1, k_hi + 1):
        level = k * math.pi
        i = int(np.argmax(th >= level))
        if i == 0:
            zeros.append(float(ts[0]))
            continue
        lo, hi = float(ts[i - 1]), float(ts[i])
        g = lambda t: sol.sol(t)[0] - level  # noqa: E731
        if g(hi) <= 0:
            zeros.append(hi)
        else:
            zeros.append(brentq(g, lo, hi, xtol=1e-13 * max(1.0, abs(hi)), rtol=1e-15))
    state = PruferState(theta_end, float(sol.y[1][-1]), float(ts[-1]))
    return PruferResult(theta_end, k_hi - k_lo, zeros, state, float(t_a), float(theta0), capped, sol)


@dataclass
class OscillationVerdict:
    kind: str  # Oscillatory | NonOscillatory | Inconclusive
    test: str  # FiteIntegral | EulerComparison | PruferCount | IntervalZero | none
    evidence: dict = field(default_factory=dict)
    analytic: bool = False

    @property
    def oscillatory(self) -> bool:
        return self.kind == "Oscillatory"

    def as_dict(self) -> dict:
        return {
            "kind": self.kind,
            "test": self.test,
            "basis": "analytic test with sampled hypotheses" if self.analytic else "numerical evidence",
            "evidence": self.evidence,
        }


def is_oscillatory_on_interval(ode: ComparisonODE, t1: float, t2: float,
                               step_policy: StepPolicy | None = None) -> OscillationVerdict:
    """Every solution vanishes on ``[t1, t2]`` iff the one vanishing at ``t1``
    vanishes again in ``(t1, t2]`` (Sturm separation)."""
    if not t1 < t2:
        raise ValueError("need t1 < t2")
    r = prufer_advance(ode, t1, t2, 0.0, step_policy, phase_cap=math.pi * (1 + 1e-9))
    if r.zero_count >= 1:
        return OscillationVerdict("Oscillatory", "IntervalZero",
                                  {"interval": [t1, t2], "zeros": [t1, r.zero_locations[0]],
                                   "phase_gain": r.phase_gain})
    return OscillationVerdict("NonOscillatory", "IntervalZero",
                              {"interval": [t1, t2], "zeros": [t1], "phase_gain": r.phase_gain})


@dataclass(frozen=True)
class OscPolicy:
    t_max: float = 1e4
    late_windows: int = 2
    sigma_max: float = 340.0
    euler_t_max: float = 1e150
    samples: int = 4001
    quad: ImproperPolicy = field(default_factory=ImproperPolicy)
    step: StepPolicy = field(default_factory=StepPolicy)


def log_transformed(ode: ComparisonODE) -> ComparisonODE:
    """For unit weight: ``s = ln t``, ``u = e^{-s/2} phi`` gives
    ``u'' + (t^2 Q(t) - 1/4) u = 0`` with the same zeros as ``phi``."""
    if not ode.unit_weight:
        raise ValueError("logarithmic change of variable needs p = 1")
    Q = ode.Q

    def Qs(s):
        t = np.exp(s)
        return t * t * Q(t) - 0.25

    start = math.log(max(ode.domain_start, 1.0))
    return ComparisonODE.with_unit_weight(Qs, start, ode.label + " [log variable]")


def _halving_windows(start: float, stop: float, count: int) -> list[tuple[float, float]]:
    length = stop - start
    out = []
    for j in range(count, 0, -1):
        out.append((start + length / 2.0**j, start + length / 2.0 ** (j - 1)))
    return out


def _sample(f: Callable, grid: np.ndarray) -> np.ndarray:
    return np.asarray(vectorize(f)(grid), dtype=float)


def _late_zero_scan(ode: ComparisonODE, start: float, stop: float, policy: OscPolicy,
                    to_t: Callable[[float], float] = float):
    windows = _halving_windows(start, stop, policy.late_windows)
    records = []
    for lo, hi in windows:
        r = prufer_advance(ode, lo, hi, 0.0, policy.step, phase_cap=2.0 * math.pi * (1 + 1e-9))
        records.append({
            "window": [to_t(lo), to_t(hi)],
            "zeros": [to_t(lo)] + [to_t(z) for z in r.zero_locations],
            "phase_gain": r.phase_gain,
            "capped": r.capped,
        })
    return records


def is_oscillatory_at_infinity(ode: ComparisonODE, policy: OscPolicy | None = None) -> OscillationVerdict:
    """Cascade: Fite integral test, Euler comparison, then Prüfer zero counting
    over late windows (in ``ln t`` as well when ``p = 1``)."""
    policy = policy or OscPolicy()
    start = ode.domain_start
    t_max = max(policy.t_max, start + 10.0)
    lin = np.linspace(start, t_max, policy.samples)
    try:
        q_lin = _sample(ode.Q, lin)
    except ArithmeticError as exc:
        return OscillationVerdict("Inconclusive", "none", {"error": str(exc)})
    notes = {}

    # Fite
    if np.all(q_lin >= 0):
        vq = classify_improper(ode.Q, start, policy.quad)
        if vq.kind == "Divergent":
            vp = classify_improper(lambda t: 1.0 / ode.p(t), start, policy.quad)
            if vp.kind == "Divergent":
                return OscillationVerdict("Oscillatory", "FiteIntegral", {
                    "potential_integral": vq.evidence(), "weight_integral": vp.evidence(),
                    "sampled_nonnegative_on": [start, t_max]}, analytic=True)
        notes["fite"] = f"potential integral {vq.kind}"
    else:
        notes["fite"] = "potential takes negative sampled values"

    # Euler comparison
    if ode.unit_weight:
        lo = max(start, 1.0)
        tt = np.geomspace(lo, policy.euler_t_max, policy.samples)
        try:
            scaled = tt * tt * _sample(ode.Q, tt)
        except ArithmeticError as exc:
            scaled = None
            notes["euler"] = f"potential not evaluable on the far tail: {exc}"
        if scaled is not None:
            bad = np.flatnonzero(scaled > 0.25 * (1.0 + 1e-12))
            first_ok = 0 if bad.size == 0 else int(bad[-1]) + 1
            half = math.sqrt(lo * policy.euler_t_max)
            if first_ok < tt.size and tt[first_ok] <= half:
                T = float(tt[first_ok])
                return OscillationVerdict("NonOscillatory", "EulerComparison", {
                    "bound": "Q(t) <= 1/(4 t^2)",
                    "verified_window": [T, float(tt[-1])],
                    "samples": int(tt.size - first_ok),
                    "max_t2Q": float(scaled[first_ok:].max()),
                }, analytic=True)
            notes["euler"] = ("bound Q <= 1/(4t^2) violated at sampled t = "
                              f"{float(tt[bad[-1]]):.6g}")

    # Prüfer over late windows
    try:
        plain = _late_zero_scan(ode, start, t_max, policy)
    except (StiffnessFailure, ArithmeticError) as exc:
        return OscillationVerdict("Inconclusive", "none", {"error": str(exc), "notes": notes})
    if all(len(w["zeros"]) >= 2 for w in plain):
        return OscillationVerdict("Oscillatory", "PruferCount",
                                  {"variable": "t", "windows": plain, "notes": notes})
    final = plain[-1]
    final_q = q_lin[lin >= final["window"][0]]
    log_scan = None
    if ode.unit_weight:
        lode = log_transformed(ode)
        try:
            log_scan = _late_zero_scan(lode, lode.domain_start, policy.sigma_max, policy, to_t=math.exp)
        except (StiffnessFailure, ArithmeticError) as exc:
            notes["log_scan"] = str(exc)
        if log_scan is not None:
            if all(len(w["zeros"]) >= 2 for w in log_scan):
                return OscillationVerdict("Oscillatory", "PruferCount",
                                          {"variable": "ln t", "windows": log_scan,
                                           "plain_windows": plain, "notes": notes})
            final = log_scan[-1]
            s_lo = math.log(final["window"][0])
            ss = np.linspace(s_lo, policy.sigma_max, policy.samples)
            try:
                final_q = _sample(ode.Q, np.exp(ss))
            except ArithmeticError:
                final_q = np.array([np.nan])

    evidence = {"windows": plain, "notes": notes}
    if log_scan is not None:
        evidence["log_windows"] = log_scan
    else:
        # without the log scan, halving windows can be shorter than the zero
        # spacing; demand a small phase gain over the whole scanned range
        try:
            whole = prufer_advance(ode, start, t_max, 0.0, policy.step, phase_cap=2.0 * math.pi * (1 + 1e-9))
        except (StiffnessFailure, ArithmeticError) as exc:
            return OscillationVerdict("Inconclusive", "none", {"error": str(exc), **evidence})
        final = {"window": [start, t_max], "zeros": [start] + whole.zero_locations,
                 "phase_gain": whole.phase_gain, "capped": whole.capped}
        evidence["whole_range"] = final
        final_q = q_lin
    one_signed = bool(np.all(final_q >= 0) or np.all(final_q <= 0))
    if final["phase_gain"] < math.pi and one_signed:
        return OscillationVerdict("NonOscillatory", "PruferCount", evidence)
    return OscillationVerdict("Inconclusive", "PruferCount", evidence)


def write_phase_csv(path: str | Path, result: PruferResult, n: int = 1001) -> None:
    """Write ``t, theta, log_r`` samples and the zero locations for plotting."""
    path = Path(path)
    ts = np.linspace(result.t_start, result.state.t, n)
    ys = result.sol.sol(ts)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "theta", "log_r"])
        for t, th, lr in zip(ts, ys[0], ys[1]):
            w.writerow([repr(float(t)), repr(float(th)), repr(float(lr))])
    with path.with_name(path.stem + "_zeros.csv").open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["zero"])
        for z in result.zero_locations:
            w.writerow([repr(z)])
