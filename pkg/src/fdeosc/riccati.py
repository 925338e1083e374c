"""Riccati equations ``y' + a y^2 + b = 0``, their linear systems, and the
comparison / nonnegativity harnesses used to exercise the oscillation proofs."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq

from .quadrature import CumulativeIntegral, integrate, vectorize

__all__ = [
    "ESCAPE",
    "GridMismatch",
    "PreconditionViolated",
    "RiccatiProblem",
    "RiccatiTrajectory",
    "SystemTrajectory",
    "Correspondence",
    "RiccatiComparison",
    "solve_riccati",
    "solve_system",
    "check_correspondence",
    "compare_riccati",
    "fde_riccati_residual",
    "riccati_tail_sign_check",
]

ESCAPE = 1e8


class GridMismatch(ValueError):
    pass


class PreconditionViolated(ValueError):
    def __init__(self, what: str, t: float, detail: str = ""):
        super().__init__(f"{what} at sampled t = {t!r}" + (f" ({detail})" if detail else ""))
        self.what = what
        self.t = t


@dataclass(frozen=True)
class RiccatiProblem:
    a: Callable
    b: Callable
    y_init: float
    t_start: float


@dataclass
class RiccatiTrajectory:
    grid: np.ndarray
    y: np.ndarray
    blowup: float | None
    underflow: bool = False
    sol: object = field(default=None, repr=False)

    def __call__(self, t):
        return self.sol.sol(t)[0] if isinstance(t, np.ndarray) else float(self.sol.sol(t)[0])


@dataclass
class SystemTrajectory:
    grid: np.ndarray
    phi: np.ndarray
    psi: np.ndarray
    sol: object = field(default=None, repr=False)

    def at(self, t):
        return self.sol.sol(t)


def _escape_event(index: int):
    def ev(t, y):
        return abs(y[index]) - ESCAPE
    ev.terminal = True
    ev.direction = 1
    return ev


def solve_riccati(prob: RiccatiProblem, t_end: float, tol: float = 1e-10) -> RiccatiTrajectory:
    """Integrate until ``t_end`` or until ``|y|`` passes the escape threshold."""
    if not t_end > prob.t_start:
        raise ValueError("t_end must exceed t_start")
    a, b = prob.a, prob.b

    def rhs(t, y):
        return [-a(t) * y[0] * y[0] - b(t)]

    sol = solve_ivp(rhs, (prob.t_start, t_end), [prob.y_init], method="DOP853", rtol=tol, atol=tol,
                    dense_output=True, events=[_escape_event(0)])
    blowup = None
    underflow = False
    if sol.status == 1:
        blowup = float(sol.t_events[0][0])
    elif sol.status == -1:
        # step size collapsed: treat the last accepted point as the escape time
        blowup = float(sol.t[-1])
        underflow = True
    return RiccatiTrajectory(np.asarray(sol.t), np.asarray(sol.y[0]), blowup, underflow, sol)


def solve_system(a: Callable, b: Callable, phi0: float, psi0: float, window: tuple[float, float],
                 tol: float = 1e-10) -> SystemTrajectory:
    """Integrate ``phi' = a psi, psi' = -b phi`` over the whole window."""
    if phi0 == 0:
        raise ValueError("phi0 must be nonzero")
    t_a, t_b = window

    def rhs(t, y):
        return [a(t) * y[1], -b(t) * y[0]]

    sol = solve_ivp(rhs, (t_a, t_b), [phi0, psi0], method="DOP853", rtol=tol, atol=tol * 1e-2,
                    dense_output=True)
    if sol.status != 0:
        raise ArithmeticError(f"linear system integration failed: {sol.message}")
    return SystemTrajectory(np.asarray(sol.t), np.asarray(sol.y[0]), np.asarray(sol.y[1]), sol)


@dataclass
class Correspondence:
    max_deviation: float
    amplitude_deviation: float
    t_stop: float
    phi_zero: float | None
    points: int


def check_correspondence(system: SystemTrajectory, riccati: RiccatiTrajectory, a: Callable,
                         *, phi_floor: float = 1e-3) -> Correspondence:
    """Compare ``psi/phi`` with ``y`` and ``phi`` with ``phi(t1) exp(int a y)``.

    The comparison runs on the Riccati grid up to the first zero of ``phi``,
    skipping points where ``|phi|`` is below ``phi_floor * |phi(t1)|``.
    """
    t1 = float(riccati.grid[0])
    if abs(float(system.grid[0]) - t1) > 1e-12 * (1.0 + abs(t1)):
        raise GridMismatch(f"trajectories start at {system.grid[0]!r} and {t1!r}")
    phi0, psi0 = float(system.phi[0]), float(system.psi[0])
    y0 = float(riccati.y[0])
    if abs(psi0 / phi0 - y0) > 1e-12 * (1.0 + abs(y0)):
        raise GridMismatch(f"initial data differ: psi0/phi0 = {psi0 / phi0!r}, y0 = {y0!r}")

    end = min(float(system.grid[-1]), float(riccati.grid[-1]))
    phi_zero = None
    sg = np.sign(system.phi)
    flips = np.flatnonzero(sg[1:] * sg[:-1] <= 0)
    if flips.size:
        i = int(flips[0])
        lo, hi = float(system.grid[i]), float(system.grid[i + 1])
        f = lambda t: system.at(t)[0]  # noqa: E731
        phi_zero = lo if f(lo) == 0 else (hi if f(hi) == 0 else brentq(f, lo, hi, xtol=1e-14))
        end = min(end, phi_zero)

    ts = riccati.grid[riccati.grid < end] if end > t1 else riccati.grid[:1]
    ts = np.union1d(ts, np.linspace(t1, end, 401)[:-1]) if end > t1 else ts
    phi, psi = system.at(ts)
    keep = np.abs(phi) >= phi_floor * abs(phi0)
    ts, phi, psi = ts[keep], phi[keep], psi[keep]
    y = riccati(ts)
    dev = float(np.max(np.abs(psi / phi - y))) if ts.size else 0.0

    amp = 0.0
    if ts.size > 1 and ts[-1] > t1:
        ay = CumulativeIntegral(lambda t: vectorize(a)(t) * riccati(t), t1, float(ts[-1]), n=801)
        formula = phi0 * np.exp(ay(ts))
        amp = float(np.max(np.abs(formula - phi)) / max(1.0, float(np.max(np.abs(phi)))))
    return Correspondence(dev, amp, float(end), phi_zero, int(ts.size))


@dataclass
class RiccatiComparison:
    ordering_holds: bool
    min_gap: float
    horizon: float
    y0_escape: float | None
    y1_escape: float | None
    existence_ordered: bool


def compare_riccati(a: Callable, b: Callable, b1: Callable, y0_init: float, y1_init: float,
                    window: tuple[float, float], tol: float = 1e-6, *, samples: int = 401,
                    rtol: float = 1e-11) -> RiccatiComparison:
    """Integrate ``y0' = -a y0^2 - b`` and ``y1' = -a y1^2 - b1`` as one system
    and check ``y0 >= y1`` up to the end of ``y1``'s existence interval."""
    t1, t2 = window
    grid = np.linspace(t1, t2, samples)
    av, bv, b1v = (np.asarray(vectorize(f)(grid), float) for f in (a, b, b1))
    neg = np.flatnonzero(av < 0)
    if neg.size:
        raise PreconditionViolated("a < 0", float(grid[neg[0]]), f"a = {av[neg[0]]!r}")
    over = np.flatnonzero(bv > b1v + 1e-14 * (1.0 + np.abs(b1v)))
    if over.size:
        i = int(over[0])
        raise PreconditionViolated("b > b1", float(grid[i]), f"b = {bv[i]!r}, b1 = {b1v[i]!r}")
    if y0_init < y1_init:
        raise PreconditionViolated("y0 < y1 initially", float(t1))

    def rhs(t, y):
        at = a(t)
        return [-at * y[0] * y[0] - b(t), -at * y[1] * y[1] - b1(t)]

    sol = solve_ivp(rhs, (t1, t2), [y0_init, y1_init], method="DOP853", rtol=rtol, atol=rtol,
                    dense_output=True, events=[_escape_event(0), _escape_event(1)])
    y0_escape = float(sol.t_events[0][0]) if len(sol.t_events[0]) else None
    y1_escape = float(sol.t_events[1][0]) if len(sol.t_events[1]) else None
    if sol.status == -1:
        # collapse of the shared step: attribute it to the more negative component
        stuck = float(sol.t[-1])
        if sol.y[0][-1] < sol.y[1][-1]:
            y0_escape = stuck
        else:
            y1_escape = stuck
    horizon = float(sol.t[-1])
    if sol.status == 1:
        # events landing in the same step: only the first terminal one is recorded
        for i in (0, 1):
            if abs(sol.y[i][-1]) >= ESCAPE * (1 - 1e-6):
                if i == 0 and y0_escape is None:
                    y0_escape = horizon
                if i == 1 and y1_escape is None:
                    y1_escape = horizon
    ts = np.union1d(sol.t, np.linspace(t1, horizon, samples))
    ys = sol.sol(ts)
    gap = ys[0] - ys[1]
    min_gap = float(gap.min())
    existence = y0_escape is None or (y1_escape is not None and y0_escape >= y1_escape)
    return RiccatiComparison(bool(min_gap >= -tol and existence), min_gap, horizon, y0_escape,
                             y1_escape, existence)


def _shifted_integral(g: Callable, t: float, s: float) -> float:
    return integrate(g, t, s, 1e-11).value if s != t else 0.0


def fde_riccati_residual(p: Callable, q: Sequence[Callable], alpha: Sequence[Callable],
                         phi: Callable, dphi: Callable, ts: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Residual of ``y' + y^2/p + sum q_k exp(int_t^{alpha_k} y/p) = 0`` along
    ``y = p phi'/phi`` built from a computed solution.

    ``y'`` is a centred difference of step ``h`` and the exponent is a
    quadrature of the interpolated ``y/p``, so the identity is tested rather
    than assumed. Points must keep ``phi`` nonzero between ``t`` and ``alpha_k(t)``.
    """
    def y(t):
        return p(t) * dphi(t) / phi(t)

    def y_over_p(t):
        return dphi(t) / phi(t)

    out = []
    for t in np.asarray(ts, dtype=float):
        dy = (y(t + h) - y(t - h)) / (2 * h)
        forcing = sum(qk(t) * math.exp(_shifted_integral(y_over_p, t, ak(t))) for qk, ak in zip(q, alpha))
        out.append(dy + y(t) ** 2 / p(t) + forcing)
    return np.asarray(out)


@dataclass
class TailSignOutcome:
    t1: float
    t2: float
    t_end: float
    min_y: float
    holds: bool
    samples: int


def riccati_tail_sign_check(p: Callable, alpha: Sequence[Callable], phi: Callable, dphi: Callable,
                    t_start: float, t_end: float, tol: float = 1e-8, samples: int = 4001) -> TailSignOutcome:
    """Past the last sampled zero ``t1`` of ``phi``, pick ``t2`` with every
    ``alpha_k >= t1`` beyond it and check ``y = p phi'/phi >= -tol`` there."""
    ts = np.linspace(t_start, t_end, samples)
    ph = np.array([phi(t) for t in ts])
    flips = np.flatnonzero(np.sign(ph[1:]) * np.sign(ph[:-1]) <= 0)
    t1 = float(ts[flips[-1] + 1]) if flips.size else float(ts[0])
    after = ts[ts >= t1]
    amin = np.min(np.array([[ak(t) for ak in alpha] for t in after]), axis=1)
    bad = np.flatnonzero(amin < t1)
    if bad.size and bad[-1] + 1 >= after.size:
        raise ValueError("deviations stay below the last zero through the window")
    t2 = float(after[bad[-1] + 1]) if bad.size else t1
    tail = after[after >= t2]
    y = np.array([p(t) * dphi(t) / phi(t) for t in tail])
    m = float(y.min())
    return TailSignOutcome(t1, t2, float(t_end), m, bool(m >= -tol), int(tail.size))
