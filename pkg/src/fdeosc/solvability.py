"""Global solvability of ``phi'' + sum a_k(t) phi(t + h_k) = 0`` by a Picard
series with an exponential majorant, plus direct trajectory oracles."""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from .problem import FDEProblem, sample_grid

__all__ = [
    "CharacteristicSpec",
    "CharacteristicRoots",
    "PicardSolution",
    "SolvabilityResult",
    "Trajectory",
    "NotConverged",
    "MissingBounds",
    "GridTooCoarse",
    "AdvancedTermPresent",
    "find_characteristic_roots",
    "majorant_closed_form",
    "aligned_step",
    "picard_solve",
    "apply_operator",
    "residual",
    "theorem_2_1_check",
    "method_of_steps_solve",
    "picard_trajectory",
    "count_zeros",
    "zero_locations",
    "write_trajectory_csv",
]


class NotConverged(ArithmeticError):
    def __init__(self, solution: "PicardSolution"):
        super().__init__(f"Picard series not converged after {solution.iterations} terms")
        self.solution = solution


class MissingBounds(ValueError):
    pass


class GridTooCoarse(ValueError):
    pass


class AdvancedTermPresent(ValueError):
    def __init__(self, k: int, t: float):
        super().__init__(f"term {k + 1} has an advanced argument at sampled t = {t!r}")
        self.k = k
        self.t = t


# ---------------------------------------------------------------------------
# characteristic equation  lambda^2 = sum a0_k exp(h_k lambda)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CharacteristicSpec:
    a0: tuple[float, ...]
    h: tuple[float, ...]

    def __post_init__(self):
        if len(self.a0) != len(self.h):
            raise ValueError("a0 and h must have equal length")
        if any(a < 0 for a in self.a0):
            raise ValueError("a0 entries must be nonnegative")

    @classmethod
    def from_problem(cls, problem: FDEProblem) -> "CharacteristicSpec":
        _require_bounds(problem)
        return cls(tuple(t.bound_a0 for t in problem.terms), tuple(t.shift for t in problem.terms))

    def g(self, lam: float) -> float:
        s = 0.0
        for a, h in zip(self.a0, self.h):
            s += a * math.exp(min(h * lam, 700.0))
        return lam * lam - s


@dataclass(frozen=True)
class CharacteristicRoots:
    neg_root: float | None
    pos_root: float | None
    residual_neg: float | None = None
    residual_pos: float | None = None

    @property
    def both(self) -> bool:
        return self.neg_root is not None and self.pos_root is not None


def _bisect(g: Callable[[float], float], lo: float, hi: float, tol: float) -> float:
    glo = g(lo)
    while abs(hi - lo) > tol * max(1.0, abs(lo), abs(hi)):
        mid = 0.5 * (lo + hi)
        gm = g(mid)
        if gm == 0:
            return mid
        if (gm < 0) == (glo < 0):
            lo, glo = mid, gm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def find_characteristic_roots(spec: CharacteristicSpec, *, max_power: int = 20,
                              tol: float = 1e-13) -> CharacteristicRoots:
    """Bracket sign changes of ``g(lambda)`` on ``+-2^j`` (``j = 0..max_power``)
    moving out from 0, then bisect. Absence of a bracket means no root reported."""
    g = spec.g
    g0 = g(0.0)
    found = []
    for sign in (-1.0, 1.0):
        prev, gprev = 0.0, g0
        root = None
        for j in range(max_power + 1):
            lam = sign * 2.0**j
            gl = g(lam)
            if gprev < 0 <= gl or gprev > 0 >= gl:
                root = _bisect(g, prev, lam, tol) if gl != 0 else lam
                break
            prev, gprev = lam, gl
        found.append(root)
    neg, pos = found
    return CharacteristicRoots(neg, pos, None if neg is None else g(neg), None if pos is None else g(pos))


def majorant_closed_form(roots: CharacteristicRoots, gamma0: float, t0: float) -> Callable:
    """``c1 e^{l1 (t - t0)} + c2 e^{l2 (t - t0)}`` with ``c1 + c2 = |gamma0|`` and
    zero slope at ``t0``."""
    l1, l2 = roots.neg_root, roots.pos_root
    if l1 is None or l2 is None:
        raise ValueError("both roots are needed")
    g = abs(gamma0)
    c1 = l2 * g / (l2 - l1)
    c2 = -l1 * g / (l2 - l1)

    def chi(t):
        t = np.asarray(t, dtype=float)
        return c1 * np.exp(l1 * (t - t0)) + c2 * np.exp(l2 * (t - t0))

    chi.c1, chi.c2 = c1, c2
    return chi


# ---------------------------------------------------------------------------
# Picard series
# ---------------------------------------------------------------------------


def _require_bounds(problem: FDEProblem):
    if problem.form != "ConstantShift":
        raise MissingBounds("the series construction needs constant shifts h_k")
    missing = [k + 1 for k, t in enumerate(problem.terms) if t.bound_a0 is None]
    if missing:
        raise MissingBounds(f"terms {missing} have no bound a0")


def _cell_integrals(values: np.ndarray, step: float) -> np.ndarray:
    # exact integrals of the not-a-knot cubic spline through the samples, cell by cell
    x = np.arange(values.size) * step
    c = CubicSpline(x, values).c
    return c[0] * step**4 / 4 + c[1] * step**3 / 3 + c[2] * step**2 / 2 + c[3] * step


def _anchored_cumsum(cells: np.ndarray, i0: int) -> np.ndarray:
    out = np.zeros(cells.size + 1)
    out[i0 + 1:] = np.cumsum(cells[i0:])
    if i0 > 0:
        out[:i0] = -np.cumsum(cells[:i0][::-1])[::-1]
    return out


def _shifted(values: np.ndarray, step: float, shifts: Sequence[float]) -> list[np.ndarray]:
    # values at x + h, held constant beyond the grid ends
    x = np.arange(values.size) * step
    spl = CubicSpline(x, values)
    out = []
    for h in shifts:
        k = h / step
        if abs(k - round(k)) < 1e-9:
            idx = np.clip(np.arange(values.size) + int(round(k)), 0, values.size - 1)
            out.append(values[idx])
        else:
            out.append(spl(np.clip(x + h, 0.0, x[-1])))
    return out


def apply_operator(f: np.ndarray, coeffs: Sequence[np.ndarray], shifts: Sequence[float],
                   step: float, i0: int, sign: float = -1.0) -> np.ndarray:
    """``sign * int_{t0}^t dtau int_{t0}^tau sum_k c_k(s) f(s + h_k) ds`` on a uniform grid.

    ``sign = -1`` gives the operator whose fixed points solve the equation,
    ``sign = +1`` with the bounds ``a0`` gives the majorant operator.
    """
    g = np.zeros_like(f)
    for c, fs in zip(coeffs, _shifted(f, step, shifts)):
        g = g + c * fs
    inner = _anchored_cumsum(_cell_integrals(g, step), i0)
    outer = _anchored_cumsum(_cell_integrals(inner, step), i0)
    return sign * outer


@dataclass
class PicardSolution:
    t0: float
    gamma0: float
    window: tuple[float, float]
    grid_step: float
    grid: np.ndarray  # core window
    values: np.ndarray  # F_N on the core
    partial_sums: list[np.ndarray]  # F_0 .. F_N on the core
    majorant: np.ndarray
    majorant_partial_sums: list[np.ndarray]
    increments: list[float]
    converged: bool
    iterations: int
    padding: float
    full_grid: np.ndarray = field(repr=False)
    full_values: np.ndarray = field(repr=False)
    core_slice: slice = field(repr=False)

    def __call__(self, t):
        x = (np.asarray(t, dtype=float) - self.full_grid[0]) / self.grid_step
        spl = CubicSpline(np.arange(self.full_grid.size), self.full_values)
        out = spl(x)
        return out if np.ndim(t) else float(out)

    def derivative(self, t):
        x = (np.asarray(t, dtype=float) - self.full_grid[0]) / self.grid_step
        spl = CubicSpline(np.arange(self.full_grid.size), self.full_values)
        out = spl(x, 1) / self.grid_step
        return out if np.ndim(t) else float(out)

    def summary(self) -> dict:
        return {
            "t0": self.t0,
            "gamma0": self.gamma0,
            "window": list(self.window),
            "grid_step": self.grid_step,
            "padding": self.padding,
            "iterations": self.iterations,
            "converged": self.converged,
            "last_increment": self.increments[-1] if self.increments else 0.0,
            "sup_abs": float(np.max(np.abs(self.values))),
        }


def aligned_step(shifts: Sequence[float], step: float) -> float:
    """Largest step not above ``step`` that puts every nonzero shift on the grid,
    if one exists; otherwise ``step`` itself."""
    hs = [abs(h) for h in shifts if h != 0]
    if not hs:
        return step
    base = min(hs)
    cand = base / math.ceil(base / step - 1e-9)
    if all(abs(h / cand - round(h / cand)) < 1e-9 for h in hs):
        return cand
    return step


def picard_solve(problem: FDEProblem, gamma0: float, t0: float, T: float, tol: float = 1e-10,
                 N_max: int = 60, step: float = 1e-3, *, strict: bool = False) -> PicardSolution:
    """Partial sums ``F_N = gamma0 + sum_{m<=N} A^m gamma0`` with ``F_N(t0) = gamma0``,
    ``F_N'(t0) = 0``, on ``[t0 - T, t0 + T]``.

    The grid is padded by ``(N_max + 1) max|h|`` on both sides; values needed
    past the padded ends are held constant, and the error this introduces
    travels inwards by at most ``max|h|`` per term, so it never reaches the core.
    """
    _require_bounds(problem)
    shifts = [term.shift for term in problem.terms]
    step = aligned_step(shifts, step)
    hmax = max(abs(h) for h in shifts)
    pad = (N_max + 1) * hmax
    k_core = int(math.ceil(T / step))
    k_pad = int(math.ceil(pad / step))
    K = k_core + k_pad + 2
    full = t0 + step * np.arange(-K, K + 1)
    i0 = K
    core = slice(K - k_core, K + k_core + 1)
    coeffs = [np.asarray(term.q(full), dtype=float) * np.ones_like(full) for term in problem.terms]
    bounds = [np.full_like(full, term.bound_a0) for term in problem.terms]

    term = np.full_like(full, float(gamma0))
    maj_term = np.full_like(full, abs(float(gamma0)))
    F = term.copy()
    Fbar = maj_term.copy()
    partial = [F[core].copy()]
    maj_partial = [Fbar[core].copy()]
    increments = []
    converged = False
    n = 0
    for n in range(1, N_max + 1):
        term = apply_operator(term, coeffs, shifts, step, i0, -1.0)
        maj_term = apply_operator(maj_term, bounds, shifts, step, i0, 1.0)
        F = F + term
        Fbar = Fbar + maj_term
        partial.append(F[core].copy())
        maj_partial.append(Fbar[core].copy())
        inc = float(np.max(np.abs(term[core])))
        increments.append(inc)
        if inc <= tol * max(1.0, float(np.max(np.abs(F[core])))):
            converged = True
            break
    sol = PicardSolution(float(t0), float(gamma0), (float(t0 - k_core * step), float(t0 + k_core * step)),
                         step, full[core].copy(), F[core].copy(), partial, Fbar[core].copy(), maj_partial,
                         increments, converged, n, pad, full, F, core)
    if strict and not converged:
        raise NotConverged(sol)
    return sol


def residual(solution: PicardSolution, problem: FDEProblem, sample_grid: np.ndarray | None = None) -> float:
    """Max of ``|phi'' + sum a_k phi(t + h_k)|`` over the core, with ``phi''`` from
    fourth-order central differences of the computed series."""
    step = solution.grid_step
    total_a0 = sum(term.bound_a0 or 0.0 for term in problem.terms)
    if solution.grid.size < 9 or step * math.sqrt(max(total_a0, 1e-300)) > 0.05:
        raise GridTooCoarse(f"grid step {step!r} too coarse for coefficient size {total_a0!r}")
    F = solution.full_values
    s = solution.core_slice
    lo, hi = s.start, s.stop
    idx = np.arange(lo, hi)
    if sample_grid is not None:
        want = np.asarray(sample_grid, dtype=float)
        idx = np.unique(np.clip(np.rint((want - solution.full_grid[0]) / step).astype(int), lo, hi - 1))
    d2 = (-F[idx + 2] + 16 * F[idx + 1] - 30 * F[idx] + 16 * F[idx - 1] - F[idx - 2]) / (12 * step * step)
    t = solution.full_grid[idx]
    forcing = np.zeros_like(t)
    for term in problem.terms:
        forcing = forcing + np.asarray(term.q(t), dtype=float) * solution(t + term.shift)
    return float(np.max(np.abs(d2 + forcing)))


@dataclass
class SolvabilityResult:
    verdict: str  # GloballySolvable | HypothesisFails | Inconclusive
    roots: CharacteristicRoots | None
    solution: PicardSolution | None
    residual: float | None
    reason: str
    witness: dict | None = None

    def as_dict(self) -> dict:
        return {
            "verdict": self.verdict,
            "reason": self.reason,
            "witness": self.witness,
            "roots": None if self.roots is None else {"negative": self.roots.neg_root,
                                                      "positive": self.roots.pos_root},
            "residual": self.residual,
            "solution": None if self.solution is None else self.solution.summary(),
        }


def theorem_2_1_check(problem: FDEProblem, gamma0: float, t0: float, T: float, tol: float = 1e-10,
                      *, N_max: int = 60, step: float = 1e-3, residual_tol: float = 1e-5) -> SolvabilityResult:
    """Sample the bounds, find both characteristic roots, build the series and
    check its residual on ``[t0 - T, t0 + T]``."""
    try:
        spec = CharacteristicSpec.from_problem(problem)
    except MissingBounds as exc:
        return SolvabilityResult("HypothesisFails", None, None, None, str(exc))
    hmax = max(abs(h) for h in spec.h)
    pad = (N_max + 1) * hmax
    grid = sample_grid(t0 - T - pad, t0 + T + pad, aligned_step(spec.h, step))
    for k, term in enumerate(problem.terms):
        q = np.abs(np.asarray(term.q(grid), dtype=float) * np.ones_like(grid))
        over = np.flatnonzero(q > term.bound_a0 * (1 + 1e-12))
        if over.size:
            i = int(over[0])
            return SolvabilityResult("HypothesisFails", None, None, None,
                                     f"|a_{k + 1}| exceeds its bound", {"k": k + 1, "t": float(grid[i]),
                                                                         "value": float(q[i])})
    roots = find_characteristic_roots(spec)
    if not roots.both:
        side = "negative" if roots.neg_root is None else "positive"
        return SolvabilityResult("HypothesisFails", roots, None, None,
                                 f"no {side} root of the characteristic equation was bracketed")
    sol = picard_solve(problem, gamma0, t0, T, tol, N_max, step)
    if not sol.converged:
        return SolvabilityResult("Inconclusive", roots, sol, None, "series did not converge within N_max terms")
    res = residual(sol, problem)
    if res >= residual_tol:
        return SolvabilityResult("Inconclusive", roots, sol, res, f"residual {res:.3g} above {residual_tol:g}")
    return SolvabilityResult("GloballySolvable", roots, sol, res,
                             "both roots found, series converged, residual small")


# ---------------------------------------------------------------------------
# trajectory oracles
# ---------------------------------------------------------------------------


def _hermite(t, ta, tb, ya, yb, da, db):
    h = tb - ta
    s = (t - ta) / h
    h00 = (1 + 2 * s) * (1 - s) ** 2
    h10 = s * (1 - s) ** 2
    h01 = s * s * (3 - 2 * s)
    h11 = s * s * (s - 1)
    return h00 * ya + h10 * h * da + h01 * yb + h11 * h * db


@dataclass
class Trajectory:
    """Piecewise cubic Hermite trajectory of ``phi`` and ``u = p phi'``."""

    grid: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    u: np.ndarray | None = None
    du: np.ndarray | None = None
    history: Callable | None = field(default=None, repr=False)

    def __call__(self, t):
        if isinstance(t, np.ndarray):
            return np.array([self(float(x)) for x in t.ravel()]).reshape(t.shape)
        g = self.grid
        if t < g[0]:
            if self.history is None:
                raise ValueError(f"t = {t!r} before trajectory start")
            return float(self.history(t))
        i = min(max(bisect.bisect_right(g, t) - 1, 0), g.size - 2)
        return float(_hermite(t, g[i], g[i + 1], self.phi[i], self.phi[i + 1], self.dphi[i], self.dphi[i + 1]))

    def derivative(self, t, p: Callable | None = None):
        """``phi'(t)``; uses the ``u`` Hermite pieces when available."""
        g = self.grid
        if t < g[0]:
            return 0.0
        i = min(max(bisect.bisect_right(g, t) - 1, 0), g.size - 2)
        if self.u is not None and p is not None:
            u = _hermite(t, g[i], g[i + 1], self.u[i], self.u[i + 1], self.du[i], self.du[i + 1])
            return float(u / p(t))
        h = g[i + 1] - g[i]
        s = (t - g[i]) / h
        # derivative of the phi Hermite piece
        d00 = 6 * s * s - 6 * s
        d10 = 3 * s * s - 4 * s + 1
        d01 = -6 * s * s + 6 * s
        d11 = 3 * s * s - 2 * s
        return float((d00 * self.phi[i] + d01 * self.phi[i + 1]) / h + d10 * self.dphi[i] + d11 * self.dphi[i + 1])


# Dormand-Prince 5(4)
_C = np.array([0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1, 1])
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_E = _B - np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])


def method_of_steps_solve(problem: FDEProblem, prehistory: float | Callable, t_end: float, tol: float = 1e-8,
                          *, dphi0: float = 0.0, max_steps: int = 200000, h0: float = 1e-2) -> Trajectory:
    """Integrate ``(p phi')' = -sum q_k phi(alpha_k)`` forward from ``t0`` for a
    purely retarded equation, reading deviated values from the stored past.

    ``prehistory`` gives ``phi`` on ``[base_point, t0]`` (a constant or a
    function); ``phi(t0)`` is its value there and ``p phi'(t0) = dphi0``.
    """
    t0 = problem.t0
    check = np.append(np.linspace(t0, t_end, 4001), t_end)
    for k, term in enumerate(problem.terms):
        a = np.asarray(term.alpha(check), dtype=float)
        bad = np.flatnonzero(a > check + 1e-12 * (1 + np.abs(check)))
        if bad.size:
            raise AdvancedTermPresent(k, float(check[bad[0]]))
    hist = (lambda t, c=float(prehistory): c) if not callable(prehistory) else prehistory
    p = problem.p
    qs = [term.q for term in problem.terms]
    alphas = [term.alpha for term in problem.terms]

    ts = [t0]
    phis = [float(hist(t0))]
    us = [float(dphi0)]
    dphis = [us[0] / p(t0)]
    dus: list[float] = []

    def past(s: float) -> float:
        if s <= t0:
            return float(hist(s))
        i = min(bisect.bisect_right(ts, s) - 1, len(ts) - 2)
        return float(_hermite(s, ts[i], ts[i + 1], phis[i], phis[i + 1], dphis[i], dphis[i + 1]))

    def rhs(t: float, y: np.ndarray, tn: float, yn: np.ndarray, dn: float) -> np.ndarray:
        forcing = 0.0
        for q, al in zip(qs, alphas):
            s = al(t)
            if s >= t - 1e-14 * (1 + abs(t)):
                v = y[0]
            elif s > tn:
                # inside the current step: Taylor from its left end
                v = yn[0] + dn * (s - tn)
            else:
                v = past(s)
            forcing += q(t) * v
        return np.array([y[1] / p(t), -forcing])

    t = t0
    y = np.array([phis[0], us[0]])
    h = min(h0, t_end - t0)
    k1 = rhs(t, y, t, y, dphis[0])
    dus.append(float(k1[1]))
    steps = 0
    while t < t_end - 1e-14 * (1 + abs(t_end)):
        if steps >= max_steps:
            raise ArithmeticError(f"step budget exhausted at t = {t!r}")
        h = min(h, t_end - t)
        dn = dphis[-1]
        ks = [k1]
        for i in range(1, 7):
            yi = y + h * sum(a * kk for a, kk in zip(_A[i], ks))
            ks.append(rhs(t + _C[i] * h, yi, t, y, dn))
        y_new = y + h * sum(b * kk for b, kk in zip(_B, ks))
        err_vec = h * sum(e * kk for e, kk in zip(_E, ks))
        scale = tol * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
        err = float(np.max(np.abs(err_vec) / scale))
        if err <= 1.0:
            t += h
            y = y_new
            k1 = ks[6]
            ts.append(t)
            phis.append(float(y[0]))
            us.append(float(y[1]))
            dphis.append(float(k1[0]))
            dus.append(float(k1[1]))
            steps += 1
        if h < 1e-14 * (1 + abs(t)):
            raise ArithmeticError(f"step size underflow at t = {t!r}")
        h *= min(5.0, max(0.2, 0.9 * (1.0 / max(err, 1e-16)) ** 0.2))
    return Trajectory(np.array(ts), np.array(phis), np.array(dphis), np.array(us), np.array(dus), hist)


def picard_trajectory(solution: PicardSolution) -> Trajectory:
    """View a Picard solution's core window as a trajectory for zero counting."""
    g = solution.grid
    return Trajectory(g, solution.values, np.asarray(solution.derivative(g)))


def zero_locations(traj: Trajectory, window: tuple[float, float]) -> list[float]:
    """Sign changes of ``phi`` on the trajectory grid inside the window, each
    refined by bisection on the interpolant."""
    a, b = window
    g = traj.grid
    inside = np.flatnonzero((g >= a) & (g <= b))
    if inside.size < 2:
        return []
    ph = traj.phi[inside]
    gg = g[inside]
    out = []
    for i in range(gg.size - 1):
        fa, fb = ph[i], ph[i + 1]
        if fa == 0:
            out.append(float(gg[i]))
        elif fa * fb < 0:
            out.append(brentq(traj, float(gg[i]), float(gg[i + 1]), xtol=1e-12))
    if ph[-1] == 0:
        out.append(float(gg[-1]))
    return out


def count_zeros(traj: Trajectory, window: tuple[float, float]) -> int:
    return len(zero_locations(traj, window))


def write_trajectory_csv(path, traj: Trajectory) -> None:
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "phi", "dphi"])
        for t, ph, d in zip(traj.grid, traj.phi, traj.dphi):
            w.writerow([repr(float(t)), repr(float(ph)), repr(float(d))])
