"""Adaptive quadrature on compact intervals and heuristic classification of
improper integrals over ``[a, inf)``.

Compact intervals use a globally adaptive Gauss-Kronrod (7, 15) scheme with
vectorised panel evaluation. Improper integrals are integrated over a sequence
of growing windows; the window increments are then tested against

* geometric decay (convergent, with an extrapolated tail bound), and
* iterated-logarithm growth models ``t, ln t, ln ln t, ln ln ln t`` (divergent
  when the increments stay proportional to the model's increments),

in addition to the plain "partial sums cross a threshold" test.
"""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicHermiteSpline

__all__ = [
    "IntegralResult",
    "ImproperPolicy",
    "ImproperVerdict",
    "NonFiniteSample",
    "ToleranceNotMet",
    "integrate",
    "classify_improper",
    "classify_sequence",
    "CumulativeIntegral",
    "TailIntegral",
    "tail_integral_direct",
    "vectorize",
]

# Kronrod 15-point nodes (nonnegative half) and weights, Gauss 7-point weights.
_XGK = np.array([
    0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
    0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
    0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
    0.207784955007898467600689403773245, 0.000000000000000000000000000000000,
])
_WGK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
])
_NODES = np.concatenate([-_XGK[:-1], _XGK[::-1]])  # 15 nodes, ascending
_WK = np.concatenate([_WGK[:-1], _WGK[::-1]])
_WG15 = np.zeros(15)
_WG15[[1, 3, 5]] = _WG[:3]
_WG15[7] = _WG[3]
_WG15[[13, 11, 9]] = _WG[:3]


class NonFiniteSample(ArithmeticError):
    def __init__(self, t):
        super().__init__(f"integrand is not finite at t={t!r}")
        self.t = t


class ToleranceNotMet(ArithmeticError):
    def __init__(self, result):
        super().__init__(
            f"quadrature tolerance not met: value={result.value!r}, error={result.error_estimate!r}"
        )
        self.result = result


@dataclass(frozen=True)
class IntegralResult:
    value: float
    error_estimate: float
    evaluations: int
    converged: bool = True


def vectorize(f: Callable) -> Callable[[np.ndarray], np.ndarray]:
    """Return an array-in/array-out version of ``f``."""
    if hasattr(f, "evaluate_array"):
        return f.evaluate_array

    def g(x):
        x = np.asarray(x, dtype=float)
        try:
            y = np.asarray(f(x), dtype=float)
            if y.shape == x.shape:
                return y
            if y.ndim == 0:
                return np.full_like(x, float(y))
        except (TypeError, ValueError):
            pass
        return np.array([float(f(float(v))) for v in x.ravel()]).reshape(x.shape)

    return g


def _panels(fv, lo: np.ndarray, hi: np.ndarray):
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    x = mid[:, None] + half[:, None] * _NODES[None, :]
    y = fv(x)
    if not np.all(np.isfinite(y)):
        raise NonFiniteSample(float(x[~np.isfinite(y)][0]))
    k = half * (y @ _WK)
    g = half * (y @ _WG15)
    return k, np.abs(k - g)


def integrate(f: Callable, a: float, b: float, tol: float = 1e-10, *, max_panels: int = 20000,
              strict: bool = False) -> IntegralResult:
    """Integrate ``f`` from ``a`` to ``b`` (oriented) to ``tol * (1 + |value|)``.

    Raises :class:`NonFiniteSample` if the integrand is not finite at a node. When
    the panel budget runs out the best estimate is returned with
    ``converged=False`` (or :class:`ToleranceNotMet` is raised if ``strict``).
    """
    if a == b:
        return IntegralResult(0.0, 0.0, 1)
    if a > b:
        r = integrate(f, b, a, tol, max_panels=max_panels, strict=strict)
        return IntegralResult(-r.value, r.error_estimate, r.evaluations, r.converged)
    fv = vectorize(f)
    n0 = 4
    edges = np.linspace(a, b, n0 + 1)
    vals, errs = _panels(fv, edges[:-1], edges[1:])
    evaluations = 15 * n0
    heap = [(-e, lo, hi, v) for e, lo, hi, v in zip(errs, edges[:-1], edges[1:], vals)]
    heapq.heapify(heap)
    total = float(np.sum(vals))
    err = float(np.sum(errs))
    while err > tol * (1.0 + abs(total)) and len(heap) < max_panels:
        # split the worst panels in one vectorised batch
        budget = err - 0.5 * tol * (1.0 + abs(total))
        batch = []
        acc = 0.0
        while heap and (acc < budget or not batch) and len(batch) < 256:
            item = heapq.heappop(heap)
            batch.append(item)
            acc += -item[0]
        lo = np.array([it[1] for it in batch])
        hi = np.array([it[2] for it in batch])
        mid = 0.5 * (lo + hi)
        if np.any((mid <= lo) | (mid >= hi)):
            for it in batch:
                heapq.heappush(heap, it)
            break
        v, e = _panels(fv, np.concatenate([lo, mid]), np.concatenate([mid, hi]))
        evaluations += 15 * len(v)
        m = len(batch)
        for i, it in enumerate(batch):
            total -= it[3]
            err -= -it[0]
            heapq.heappush(heap, (-e[i], lo[i], mid[i], v[i]))
            heapq.heappush(heap, (-e[m + i], mid[i], hi[i], v[m + i]))
            total += v[i] + v[m + i]
            err += e[i] + e[m + i]
        # resum to stop drift from incremental updates
        if len(heap) % 1024 < 2 * m:
            total = math.fsum(it[3] for it in heap)
            err = math.fsum(-it[0] for it in heap)
    total = math.fsum(it[3] for it in heap)
    err = math.fsum(-it[0] for it in heap)
    result = IntegralResult(total, err, evaluations, err <= tol * (1.0 + abs(total)))
    if strict and not result.converged:
        raise ToleranceNotMet(result)
    return result


# ---------------------------------------------------------------------------
# improper integrals
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ImproperPolicy:
    window_growth: float = 2.0
    max_windows: int = 40
    divergence_threshold: float = 1e6
    tail_tol: float = 1e-8
    additive_length: float = 1.0
    window_tol: float = 1e-11
    decay_ratio: float = 0.75
    rate_windows: int = 8
    rate_slack: float = 0.02
    min_windows: int = 12
    max_panels: int = 20000


@dataclass
class ImproperVerdict:
    kind: str  # "Divergent" | "Convergent" | "Inconclusive"
    value: float | None = None
    tail_bound: float | None = None
    reason: str = ""
    edges: list = field(default_factory=list)
    partial_sums: list = field(default_factory=list)
    increments: list = field(default_factory=list)
    model: str | None = None

    def evidence(self) -> dict:
        return {
            "kind": self.kind,
            "value": self.value,
            "tail_bound": self.tail_bound,
            "reason": self.reason,
            "model": self.model,
            "window_ends": list(self.edges[1:]),
            "partial_sums": list(self.partial_sums),
        }


def _window_edges(a: float, policy: ImproperPolicy) -> list[float]:
    g = policy.window_growth
    if a > 0:
        return [a * g**j for j in range(policy.max_windows + 1)]
    return [a] + [a + policy.additive_length * g ** (j - 1) for j in range(1, policy.max_windows + 1)]


def _iterlog(x: float, m: int) -> float:
    for _ in range(m):
        if x <= 0:
            return math.nan
        x = math.log(x)
    return x


_MODEL_NAMES = ("t", "ln t", "ln ln t", "ln ln ln t")
# smallest t at which each model is defined and increasing
_MODEL_FLOOR = (-math.inf, 0.0, 1.0, math.e)


def _rate_divergence(edges, incs, policy: ImproperPolicy):
    """Look for increments proportional to an iterated-log model's increments."""
    k = policy.rate_windows
    j = len(incs)
    if j < max(policy.min_windows, k + 1):
        return None
    lo_edge = edges[j - k]
    for m in range(4):
        if lo_edge <= _MODEL_FLOOR[m]:
            continue
        rhos = []
        for i in range(j - k, j):
            dm = _iterlog(edges[i + 1], m) - _iterlog(edges[i], m)
            if not dm > 0:
                rhos = None
                break
            rhos.append(incs[i] / dm)
        if not rhos:
            continue
        rhos = np.array(rhos)
        if np.all(rhos > 0) or np.all(rhos < 0):
            r = np.abs(rhos)
            if r.max() <= (1.0 + policy.rate_slack) * r.min():
                return m, float(r[-1])
    return None


def _window_decision(edges, incs, s, policy: ImproperPolicy):
    k = policy.rate_windows
    if len(incs) > k:
        last = np.abs(np.array(incs[-k - 1:]))
        if np.all(last == 0.0):
            return ImproperVerdict("Convergent", s, 0.0, "increments vanish", edges, [], incs)
        if np.all(last[:-1] > 0) and last[-1] <= policy.tail_tol:
            ratios = last[1:] / last[:-1]
            rmax = float(ratios.max())
            if rmax <= policy.decay_ratio:
                tail = float(last[-1] * rmax / (1.0 - rmax))
                if tail < policy.tail_tol:
                    sign = math.copysign(1.0, incs[-1])
                    return ImproperVerdict("Convergent", s + sign * tail, tail,
                                           f"increments decay geometrically (ratio <= {rmax:.3g})",
                                           edges, [], incs)
    if abs(s) > policy.divergence_threshold:
        last = np.abs(np.array(incs[-2:]))
        if len(last) < 2 or last[1] >= policy.decay_ratio * last[0]:
            return ImproperVerdict("Divergent", s, None,
                                   f"partial sum {s:.6g} exceeds threshold {policy.divergence_threshold:g}",
                                   edges, [], incs)
    return None


def _final_decision(edges, incs, s, policy: ImproperPolicy, stop_reason: str):
    hit = _rate_divergence(edges, incs, policy)
    if hit is not None:
        m, rho = hit
        # partial sum reaches the threshold once the model has grown by this much
        needed = (policy.divergence_threshold - abs(s)) / rho
        return ImproperVerdict("Divergent", s, None,
                               f"last {policy.rate_windows} increments track d({_MODEL_NAMES[m]}) with "
                               f"constant {rho:.6g}; threshold crossed after {_MODEL_NAMES[m]} grows by {needed:.6g}",
                               edges, [], incs, _MODEL_NAMES[m])
    return ImproperVerdict("Inconclusive", s, None, f"no decisive trend ({stop_reason})", edges, [], incs)


def classify_sequence(edges, values, policy: ImproperPolicy | None = None) -> ImproperVerdict:
    """Classify the growth of ``values[j]`` sampled at increasing ``edges[j]``.

    Same decision rules as :func:`classify_improper`, applied to the increments
    of a monotone-looking sequence (used for ``lim alpha(t) = inf`` checks).
    """
    policy = policy or ImproperPolicy()
    values = [float(v) for v in values]
    incs: list[float] = []
    sums: list[float] = []
    s = 0.0
    for j in range(1, len(values)):
        incs.append(values[j] - values[j - 1])
        s = values[j] - values[0]
        sums.append(values[j])
        v = _window_decision(list(edges[: j + 1]), incs, s, policy)
        if v is not None:
            v.partial_sums = sums
            v.value = values[0] + (v.value if v.value is not None else s)
            return v
    v = _final_decision(list(edges[: len(values)]), incs, s, policy, "sequence exhausted")
    v.partial_sums = sums
    v.value = values[-1] if values else None
    return v


def classify_improper(f: Callable, a: float, policy: ImproperPolicy | None = None) -> ImproperVerdict:
    """Classify ``int_a^inf f`` as Divergent, Convergent or Inconclusive.

    The verdict is evidence gathered on finitely many windows, not a proof.
    """
    policy = policy or ImproperPolicy()
    edges = _window_edges(a, policy)
    incs: list[float] = []
    sums: list[float] = []
    s = 0.0
    stop_reason = "window budget exhausted"
    for j in range(1, len(edges)):
        r = integrate(f, edges[j - 1], edges[j], policy.window_tol, max_panels=policy.max_panels)
        if not r.converged:
            stop_reason = f"window [{edges[j - 1]!r}, {edges[j]!r}] quadrature did not converge"
            break
        incs.append(r.value)
        s += r.value
        sums.append(s)
        v = _window_decision(edges[: j + 1], incs, s, policy)
        if v is not None:
            v.partial_sums = sums
            return v
    v = _final_decision(edges[: len(incs) + 1], incs, s, policy, stop_reason)
    v.partial_sums = sums
    return v


# ---------------------------------------------------------------------------
# cached integral tables
# ---------------------------------------------------------------------------


def _stretched_nodes(a: float, b: float, n: int, scale: float = 1.0) -> np.ndarray:
    c = min(scale, b - a)
    s = np.linspace(0.0, math.log1p((b - a) / c), n)
    x = a + c * np.expm1(s)
    x[0], x[-1] = a, b
    return x


class CumulativeIntegral:
    """``F(x) = int_a^x f`` tabulated on nodes over ``[a, b]``, Hermite-interpolated.

    ``stretched=True`` places nodes densely near ``a`` and geometrically further
    out, which suits integrands decaying like a power of ``t``.
    """

    def __init__(self, f: Callable, a: float, b: float, n: int = 2001, *, stretched: bool = False,
                 tol: float = 1e-12):
        if not b > a:
            raise ValueError("CumulativeIntegral needs b > a")
        self.a, self.b = float(a), float(b)
        self.nodes = _stretched_nodes(a, b, n) if stretched else np.linspace(a, b, n)
        fv = vectorize(f)
        vals, errs = _panels(fv, self.nodes[:-1], self.nodes[1:])
        bad = np.flatnonzero(errs > tol * (1.0 + np.abs(vals)))
        for i in bad:
            vals[i] = integrate(f, self.nodes[i], self.nodes[i + 1], tol).value
        self.cells = vals
        self.values = np.concatenate([[0.0], np.cumsum(vals)])
        # the slope of F is f itself, so a Hermite cubic needs no estimated derivatives
        self._interp = CubicHermiteSpline(self.nodes, self.values, fv(self.nodes), extrapolate=True)
        self._f = f

    def __call__(self, x):
        return self._interp(x) if isinstance(x, np.ndarray) else float(self._interp(x))

    def between(self, x, y):
        """Oriented ``int_x^y f``."""
        return self(y) - self(x)


class TailIntegral:
    """``R(tau) = int_tau^inf f`` cached on a grid, for an integrand already
    classified Convergent from ``a``.

    Beyond the truncation point the tail is held at its last tabulated value,
    which is below the policy's tail tolerance.
    """

    def __init__(self, f: Callable, a: float, verdict: ImproperVerdict, n: int = 4001):
        if verdict.kind != "Convergent":
            raise ValueError("tail integral needs a Convergent verdict")
        self.a = float(a)
        self.b = float(verdict.edges[-1])
        self.total = float(verdict.value)
        fv = vectorize(f)
        nodes = _stretched_nodes(self.a, self.b, n)
        vals, errs = _panels(fv, nodes[:-1], nodes[1:])
        bad = np.flatnonzero(errs > 1e-12 * (1.0 + np.abs(vals)))
        for i in bad:
            vals[i] = integrate(f, nodes[i], nodes[i + 1], 1e-12).value
        r = self.total - np.concatenate([[0.0], np.cumsum(vals)])
        if np.all(vals >= 0):
            r = np.maximum(np.minimum.accumulate(r), 0.0)
        self.nodes = nodes
        self.values = r
        self._interp = CubicHermiteSpline(nodes, r, -fv(nodes), extrapolate=False)
        self._f = f

    def __call__(self, tau):
        tau_arr = np.asarray(tau, dtype=float)
        out = np.where(tau_arr >= self.b, self.values[-1], 0.0)
        inside = (tau_arr >= self.a) & (tau_arr < self.b)
        if np.any(inside):
            out = np.where(inside, self._interp(np.clip(tau_arr, self.a, self.b)), out)
        below = tau_arr < self.a
        if np.any(below):
            extra = np.array([integrate(self._f, x, self.a, 1e-12).value for x in np.atleast_1d(tau_arr)[np.atleast_1d(below)]])
            out = np.array(out, dtype=float)
            out[below] = self.values[0] + extra
        return out if isinstance(tau, np.ndarray) else float(out)


def tail_integral_direct(f: Callable, tau: float, policy: ImproperPolicy | None = None) -> float:
    """Per-call ``int_tau^inf f``; raises ValueError unless the tail classifies Convergent."""
    v = classify_improper(f, tau, policy)
    if v.kind != "Convergent":
        raise ValueError(f"tail from {tau!r} is {v.kind}: {v.reason}")
    return float(v.value)
