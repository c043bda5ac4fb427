"""Shock curves of the glued solution and exact scalar front tracking.

Curve i separates piece i (left) from piece i+1 (right). Curves that touch are
glued into a group; a group of curves first..last separates piece first from
piece last+1 and the pieces in between are dropped.
"""
import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from .model import rh_speed

LARGE = "large"
BOUNDARY = "boundary"
FRONT = "front"


@dataclass
class ShockCurve:
    index: int
    cls: str
    x0: float
    merges: list = field(default_factory=list)


@dataclass
class Group:
    """Glued curves first..last moving as one."""

    first: int
    last: int
    x: float

    @property
    def left(self):
        return self.first

    @property
    def right(self):
        return self.last + 1


def _sigma(law, a, b):
    d = a - b
    if abs(d) <= 1e-14 * (1.0 + abs(b)):
        return float(law.dA(0.5 * (a + b)))
    return float((law.A(a) - law.A(b)) / d)


class CurveSystem:
    """Advance shock curves by RK4 on the Rankine-Hugoniot ODE with merging.

    value(k, x, theta) returns piece k at x and time t_n + theta dt.
    const(k) returns the value of piece k if it is constant in space and time,
    otherwise None; pairs of constant pieces move exactly.
    """

    def __init__(self, curves, model, scale=1.0, value=None, const=None):
        self.curves = list(curves)
        self.model = model
        self.law = model.law
        self.groups = [Group(c.index, c.index, c.x0) for c in curves]
        self.tol = 1e-12 * scale
        self.value = value
        self.const = const if const is not None else (lambda k: None)
        self.t = 0.0
        self.events = []

    # ------------------------------------------------------------------
    def speed(self, g, x, theta):
        return _sigma(self.law, self.value(g.left, x, theta), self.value(g.right, x, theta))

    def _rk4(self, g, x, th0, th1, dt):
        """Classic RK4 from theta th0 to th1 with RHS dx/dt = speed."""
        ca, cb = self.const(g.left), self.const(g.right)
        span = (th1 - th0) * dt
        if ca is not None and cb is not None:
            s = _sigma(self.law, ca, cb)
            return x + span * s, s, s
        thm = 0.5 * (th0 + th1)
        k1 = self.speed(g, x, th0)
        k2 = self.speed(g, x + 0.5 * span * k1, thm)
        k3 = self.speed(g, x + 0.5 * span * k2, thm)
        k4 = self.speed(g, x + span * k3, th1)
        xn = x + span * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        return xn, k1, self.speed(g, xn, th1)

    def _trial(self, th0, th1, dt):
        return [self._rk4(g, g.x, th0, th1, dt)[0] for g in self.groups]

    def positions(self):
        """Position of every curve index (glued curves share the value)."""
        out = np.empty(len(self.curves))
        for g in self.groups:
            out[g.first : g.last + 1] = g.x
        return out

    def group_of(self, i):
        for g in self.groups:
            if g.first <= i <= g.last:
                return g
        raise KeyError(i)

    def advance(self, dt):
        """Advance one step; returns per-group Hermite segments for defect sampling.

        Each segment is (first, last, th0, th1, x0, x1, f0, f1) in step-relative time.
        """
        segs = []
        th = 0.0
        while th < 1.0:
            trial = self._trial(th, 1.0, dt)
            hit = self._first_contact(th, trial, dt)
            if hit is None:
                th_end = 1.0
                new = trial
            else:
                th_end = hit
                new = self._trial(th, th_end, dt)
            for g, xn in zip(self.groups, new):
                x0 = g.x
                _, f0, _ = self._rk4(g, x0, th, th_end, dt)
                f1 = self.speed(g, xn, th_end) if th_end > th else f0
                segs.append((g.first, g.last, th, th_end, x0, xn, f0, f1))
                g.x = xn
            if hit is not None:
                self._merge(self.t + th_end * dt)
            th = th_end
        self.t += dt
        return segs

    def _first_contact(self, th0, trial, dt):
        best = None
        for k in range(len(self.groups) - 1):
            if trial[k + 1] - trial[k] > self.tol:
                continue
            ga, gb = self.groups[k], self.groups[k + 1]
            lo, hi = th0, 1.0
            if gb.x - ga.x <= self.tol:
                best = th0 if best is None else min(best, th0)
                continue
            for _ in range(200):
                mid = 0.5 * (lo + hi)
                xa = self._rk4(ga, ga.x, th0, mid, dt)[0]
                xb = self._rk4(gb, gb.x, th0, mid, dt)[0]
                if xb - xa > self.tol:
                    lo = mid
                else:
                    hi = mid
                if hi - lo < 1e-13:
                    break
            best = hi if best is None else min(best, hi)
        return best

    def _merge(self, t):
        out = [self.groups[0]]
        for g in self.groups[1:]:
            prev = out[-1]
            if g.x - prev.x <= self.tol:
                x = 0.5 * (g.x + prev.x)
                merged = Group(prev.first, g.last, x)
                self.events.append((t, prev.first, prev.last, g.first, g.last))
                for i in range(prev.first, g.last + 1):
                    self.curves[i].merges.append((t, prev.first, g.last))
                out[-1] = merged
            else:
                out.append(g)
        self.groups = out

    def alive_pieces(self):
        """Indices of pieces present in the glued solution."""
        out = [self.groups[0].left]
        for g in self.groups:
            out.append(g.right)
        return out


class GluedSolution:
    """Evaluator of the glued solution at the current time of a curve system."""

    def __init__(self, system, piece_value):
        self.system = system
        self.piece_value = piece_value

    def evaluate(self, x, theta=1.0):
        """Value at x; points exactly on a curve take the right trace."""
        x = np.asarray(x, dtype=float)
        groups = self.system.groups
        pos = np.array([g.x for g in groups])
        idx = np.searchsorted(pos, x, side="right")
        pieces = [groups[0].left] + [g.right for g in groups]
        out = np.empty_like(x)
        for slot, k in enumerate(pieces):
            m = idx == slot
            if np.any(m):
                out[m] = self.piece_value(k, x[m], theta)
        return out


# -------------------------------------------------------------- front tracking


@dataclass
class FrontTrackState:
    """Decreasing plateaus c_0 > ... > c_m separated by fronts at positions p_1..p_m."""

    plateaus: tuple
    positions: tuple
    t: float = 0.0

    def __post_init__(self):
        if len(self.plateaus) != len(self.positions) + 1:
            raise ValueError("need one more plateau than fronts")
        if any(b >= a for a, b in zip(self.plateaus, self.plateaus[1:])):
            raise ValueError("plateaus must be strictly decreasing")
        if any(b < a for a, b in zip(self.positions, self.positions[1:])):
            raise ValueError("fronts must be ordered")

    def value(self, x):
        idx = np.searchsorted(np.asarray(self.positions), np.asarray(x, float), side="right")
        return np.asarray(self.plateaus)[idx]

    def clip(self, first, last):
        """Fronts first..last only, constant continuation outside them."""
        return FrontTrackState(
            tuple(self.plateaus[first : last + 2]), tuple(self.positions[first : last + 1]), self.t
        )

    def integral(self, a, b):
        """Exact integral of the staircase over [a, b]."""
        edges = [a] + [min(max(p, a), b) for p in self.positions] + [b]
        return float(sum(c * (r - l) for c, l, r in zip(self.plateaus, edges[:-1], edges[1:])))


@dataclass
class FrontTrajectory:
    """Piecewise-linear front paths produced by the event simulation."""

    model: object
    start: FrontTrackState
    # per event: (time, left plateau index removed) recorded as snapshots
    snapshots: list
    events: list

    def state_at(self, t):
        """Exact staircase at time t."""
        k = 0
        while k + 1 < len(self.snapshots) and self.snapshots[k + 1][0] <= t:
            k += 1
        t0, plateaus, pos, speeds = self.snapshots[k]
        new = tuple(p + s * (t - t0) for p, s in zip(pos, speeds))
        return FrontTrackState(tuple(plateaus), new, t)

    @property
    def final_time(self):
        return self.snapshots[-1][0]


def _speeds(model, plateaus, bias):
    return [
        rh_speed(model, plateaus[k], plateaus[k + 1]) + bias[k] for k in range(len(plateaus) - 1)
    ]


def ft_evolve(state, T, model, speed_error=None):
    """Exact event-driven front tracking up to time T.

    speed_error maps a front's original index to a constant added to its speed;
    a merged front keeps the index of its leftmost parent.
    """
    plateaus = list(state.plateaus)
    pos = list(state.positions)
    ids = list(range(len(pos)))
    err = speed_error or {}
    t = state.t
    snaps = []
    events = []
    version = [0]

    def speeds():
        return _speeds(model, plateaus, [err.get(i, 0.0) for i in ids])

    while True:
        sp = speeds()
        snaps.append((t, tuple(plateaus), tuple(pos), tuple(sp)))
        heap = []
        for k in range(len(pos) - 1):
            rel = sp[k] - sp[k + 1]
            if rel > 0.0:
                tc = t + (pos[k + 1] - pos[k]) / rel
                heapq.heappush(heap, (tc, k, version[0]))
        if not heap:
            break
        tc, k, _ = heapq.heappop(heap)
        if tc > T:
            break
        # collect every pair colliding at the same instant, left to right
        hits = [k]
        while heap and heap[0][0] <= tc + 1e-14:
            hits.append(heapq.heappop(heap)[1])
        pos = [p + s * (tc - t) for p, s in zip(pos, sp)]
        t = tc
        for k in sorted(set(hits), reverse=True):
            # fronts k and k+1 meet: plateau k+1 disappears
            x = 0.5 * (pos[k] + pos[k + 1])
            events.append((t, ids[k], ids[k + 1]))
            del plateaus[k + 1]
            del pos[k + 1]
            del ids[k + 1]
            pos[k] = x
        version[0] += 1
    return FrontTrajectory(model, state, snaps, events)


def discrete_slope(state, delta):
    """inf of (u(x) - u(y)) / (y - x) over fronts-bounded x < y with y > x + delta.

    Returns None when fewer than two fronts remain or no admissible pair exists.
    """
    pos = state.positions
    m = len(pos)
    if m < 2:
        return None
    jumps = [state.plateaus[k] - state.plateaus[k + 1] for k in range(m)]
    best = None
    for i in range(m):
        inner = 0.0
        for j in range(i + 1, m):
            length = pos[j] - pos[i]
            if length > delta:
                r = inner / length
                best = r if best is None else min(best, r)
            inner += jumps[j]
    return best
