"""First-order finite-volume evolution of single pieces and analytic side bounds.

Each piece lives on a window of a shared uniform grid. Cell averages are
advanced with the Engquist-Osher flux and forward Euler. The space-time
reconstruction interpolates linearly between cell midpoints and linearly in
time between levels; outside its window a piece is continued by the value of
its outermost cell.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .model import gronwall_constant

DEFAULT_CFL = 0.45


@dataclass(frozen=True)
class Grid:
    x_lo: float
    n: int
    h: float
    dt: float
    cfl: float

    @property
    def x_hi(self):
        return self.x_lo + self.n * self.h

    @property
    def mids(self):
        return self.x_lo + (np.arange(self.n) + 0.5) * self.h

    @property
    def edges(self):
        return self.x_lo + np.arange(self.n + 1) * self.h

    def cell_of(self, x):
        return int(math.floor((x - self.x_lo) / self.h))

    def interval_of(self, x):
        """Index g of the midpoint interval [mid_g, mid_{g+1}] containing x."""
        return int(math.floor((x - self.x_lo) / self.h - 0.5))


def make_grid(x_lo, x_hi, h, speed, cfl=DEFAULT_CFL, dt=None):
    if cfl <= 0.0 or cfl > 1.0:
        raise ValueError("CFL number must lie in (0, 1]")
    n = int(math.ceil((x_hi - x_lo) / h - 1e-9))
    if dt is None:
        dt = cfl * h / speed
    elif dt > cfl * h / speed * (1 + 1e-12):
        raise ValueError("time step violates the CFL condition")
    return Grid(float(x_lo), n, float(h), float(dt), float(cfl))


@dataclass(frozen=True)
class ConeWindow:
    S: float
    s: float

    def at(self, t):
        return (-self.S + self.s * t, self.S - self.s * t)


def cone_for(breakpoints, model, T, margin=1e-6):
    """Smallest admissible cone half-width for the given data."""
    k = model.const
    xmax = max([abs(x) for x in breakpoints] + [0.0])
    S = (xmax + k.info_speed * T + T * k.sup_dA) * (1.0 + margin) + margin
    return ConeWindow(S, k.info_speed)


def eo_flux(model, left, right):
    """Engquist-Osher flux A(max(l, m)) + A(min(r, m)) - A(m), m the sonic point."""
    law = model.law
    m = law.sonic
    left = np.asarray(left, float)
    right = np.asarray(right, float)
    out = law.A(np.maximum(left, m)) + law.A(np.minimum(right, m)) - law.A(m)
    return float(out) if out.ndim == 0 else out


def flux_coeffs(model):
    coef = np.zeros(max(3, len(model.law.coeffs)))
    coef[: len(model.law.coeffs)] = model.law.coeffs
    return coef, np.asarray(model.law.dA.coef, dtype=float)


def _initial_averages(init, edges):
    if hasattr(init, "cell_averages"):
        return init.cell_averages(edges)
    # four-point Gauss average per cell
    nodes, weights = np.polynomial.legendre.leggauss(4)
    a, b = edges[:-1], edges[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    tot = sum(w * np.asarray(init(mid + z * half), float) for z, w in zip(nodes, weights))
    return 0.5 * tot


class PieceSolution:
    """Cell averages of one piece on the global cells lo .. lo+n-1."""

    def __init__(self, index, grid, lo, u0, model, store=True, check=True):
        self.index = index
        self.grid = grid
        self.lo = int(lo)
        self.model = model
        self.coef, self.dcoef = flux_coeffs(model)
        self.sonic = model.law.sonic
        self.lam = grid.dt / grid.h
        self.u = np.ascontiguousarray(u0, dtype=float)
        self.prev = self.u
        self.mids = grid.x_lo + (self.lo + np.arange(len(self.u)) + 0.5) * grid.h
        self.vmin = float(self.u.min())
        self.vmax = float(self.u.max())
        self.monotone = bool(np.all(np.diff(self.u) >= 0.0))
        self.check = check
        self.store = store
        self.levels = [self.u.copy()] if store else None
        self.steps = 0
        self.resid = 0.0
        self.lips = [self.lip()]

    @property
    def n(self):
        return len(self.u)

    @property
    def hi(self):
        return self.lo + self.n

    @property
    def x_lo(self):
        return self.grid.x_lo + self.lo * self.grid.h

    @property
    def t(self):
        return self.steps * self.grid.dt

    def lip(self, u=None):
        u = self.u if u is None else u
        if len(u) < 2:
            return 0.0
        return float(np.max(np.abs(np.diff(u)))) / self.grid.h

    def min_slope(self, u=None):
        u = self.u if u is None else u
        if len(u) < 2:
            return 0.0
        return float(np.min(np.diff(u))) / self.grid.h

    def step(self, accumulate=True):
        new = K.fv_step(self.u, self.coef, self.sonic, self.lam)
        if not np.all(np.isfinite(new)):
            raise FloatingPointError(f"non-finite values in piece {self.index}")
        if self.check:
            tol = 1e-12 * max(1.0, abs(self.vmin), abs(self.vmax))
            if new.min() < self.vmin - tol or new.max() > self.vmax + tol:
                raise AssertionError(f"maximum principle violated in piece {self.index}")
            if self.monotone and np.any(np.diff(new) < -tol):
                raise AssertionError(f"monotonicity lost in piece {self.index}")
        self.prev, self.u = self.u, new
        self.steps += 1
        if accumulate:
            self.resid += K.r2_grid_sum(self.prev, self.u, self.dcoef, self.grid.h, self.grid.dt)
        self.lips.append(self.lip())
        if self.store:
            self.levels.append(new.copy())
        return new

    # reconstruction -------------------------------------------------------

    def _space(self, u, x):
        """Linear interpolation between midpoints, constant beyond the window."""
        return np.interp(x, self.mids, u)

    def value_between(self, x, theta):
        """Reconstruction at x and time t_prev + theta dt of the last step."""
        xa = np.asarray(x, dtype=float)
        a = self._space(self.prev, xa)
        if theta == 0.0:
            return a
        return (1.0 - theta) * a + theta * self._space(self.u, xa)

    def value_scalar(self, x, theta):
        """Fast scalar version of value_between."""
        h = self.grid.h
        s = (x - self.x_lo) / h - 0.5
        j = math.floor(s)
        n = self.n
        if j < 0:
            return (1.0 - theta) * self.prev[0] + theta * self.u[0]
        if j >= n - 1:
            return (1.0 - theta) * self.prev[-1] + theta * self.u[-1]
        w = s - j
        p, u = self.prev, self.u
        a = p[j] + w * (p[j + 1] - p[j])
        b = u[j] + w * (u[j + 1] - u[j])
        return a + theta * (b - a)

    def reconstruct(self, x, t):
        """Reconstruction from stored levels at arbitrary (x, t)."""
        if not self.store:
            raise RuntimeError("levels are not stored")
        if t < -1e-14 or t > self.t + 1e-12:
            raise ValueError("time outside the stored window")
        s = t / self.grid.dt
        n = min(int(math.floor(s)), self.steps - 1) if self.steps else 0
        theta = s - n if self.steps else 0.0
        a = self._space(self.levels[n], np.asarray(x, float))
        if self.steps == 0:
            return a
        b = self._space(self.levels[n + 1], np.asarray(x, float))
        return (1.0 - theta) * a + theta * b


def evolve(init, grid, T, model, index=0, lo=0, n=None, store=True, check=True):
    """Evolve one piece to time T on cells lo .. lo+n-1 of the grid."""
    n = grid.n - lo if n is None else n
    edges = grid.x_lo + (lo + np.arange(n + 1)) * grid.h
    u0 = _initial_averages(init, edges)
    sol = PieceSolution(index, grid, lo, u0, model, store=store, check=check)
    steps = int(round(T / grid.dt)) if T > 0 else 0
    if steps * grid.dt < T - 1e-12:
        steps += 1
    for _ in range(steps):
        sol.step()
    return sol


def reconstruct(sol, x, t):
    return sol.reconstruct(x, t)


def residual_l2_cone(sols, cone, t, windows=None):
    """Space-time integral up to t of the pointwise max over revealed pieces of R^2.

    windows(k, t0, t1) returns the x-interval where piece k may be revealed
    during [t0, t1] (all of the cone when omitted). Solutions must store levels.
    """
    grid = sols[0].grid
    h, dt = grid.h, grid.dt
    nsteps = min(int(round(t / dt)), min(s.steps for s in sols))
    total = 0.0
    buf = np.zeros((grid.n, 4))
    for step in range(nsteps):
        t0, t1 = step * dt, (step + 1) * dt
        buf[:] = 0.0
        lo_c, hi_c = cone.at(t1) if cone is not None else (grid.x_lo, grid.x_hi)
        for k, s in enumerate(sols):
            xa, xb = (lo_c, hi_c) if windows is None else windows(k, t0, t1)
            xa, xb = max(xa, lo_c), min(xb, hi_c)
            if xb <= xa:
                continue
            g0 = max(grid.interval_of(xa), 0)
            g1 = min(grid.interval_of(xb) + 1, grid.n - 1)
            K.r2_grid_max(buf, s.levels[step], s.levels[step + 1], s.lo, g0, g1, s.dcoef, h, dt)
        total += 0.25 * h * dt * buf.sum()
    return total


def lipschitz_bound(sup0, inf0, t, amin):
    """Lipschitz constant of a smooth solution at time t from initial slope bounds."""

    def branch(d):
        if d == 0.0:
            return 0.0
        den = 1.0 / d + t * amin
        if d < 0.0 and den >= 0.0:
            return math.inf
        return abs(1.0 / den)

    return max(branch(sup0), branch(inf0))


def gap_bound(rho, lip_min, t, amax):
    """Lower bound rho / (1 + amax lip_min t) on the gap between ordered solutions."""
    return rho / (1.0 + amax * lip_min * t)


def linf_bound(lips, init_l2, resid, T, C):
    """(8 (Lip sum) C e^{CT} (init_l2^2 + resid^2))^{1/3}."""
    return (8.0 * sum(lips) * C * math.exp(C * T) * (init_l2**2 + resid**2)) ** (1.0 / 3.0)


@dataclass
class LevelSetResult:
    passed: bool
    margin: float
    position_error: float
    gap: float


def level_set_check(line, resid, gap, model, T, init_l2=0.0, neg_slope=0.0):
    """Bound the drift of the plateau level set of a line solution.

    line is the evolved line solution, resid the square root of its space-time
    residual integral. Passes when the level-set position error is below gap.
    """
    slopes = np.diff(line.u) / line.grid.h
    if np.any(slopes <= 0.0):
        raise AssertionError("line solution is not strictly increasing")
    C = gronwall_constant(model, neg_slope)
    lip_num = max(line.lips)
    lip_exact = line.lips[0]
    err = linf_bound([lip_exact, lip_num], init_l2, resid, T, C)
    pos = err / float(slopes.min())
    return LevelSetResult(pos < gap, gap - pos, pos, gap)
