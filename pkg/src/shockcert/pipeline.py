"""One certified run: pieces, shock curves and error bounds advanced together.

Levels are streamed: only the two time levels of the current step are kept.
The residual window of a piece at step n uses the uncertainties known at t_n
widened by twice the maximal wave speed times the step, which bounds every
admissible curve position on [t_n, t_{n+1}].
"""
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as K
from .estimator import (
    CertificateEvent,
    ShiftState,
    boundary_delta,
    delta_inner,
    delta_large,
    entropy_factor,
    fine_initial_entropy,
    gamma,
    l1_bound,
    l2_bound,
    rd_pair_certified,
    shock_size_fixpoint,
    speed_gap_m,
    uncertainty_integral,
    upsilon,
    worst_case,
)
from .model import gronwall_constant, model_by_name, relative_entropy
from .preprocess import NND, STEP, build_extensions, classify, insert_steps, parse_profile, slope_m
from .shocks import BOUNDARY, FRONT, LARGE, CurveSystem, FrontTrackState, ShockCurve, discrete_slope, ft_evolve
from .solver import DEFAULT_CFL, Grid, PieceSolution, cone_for, flux_coeffs, gap_bound, level_set_check

NO, MAYBE, YES = 0, 1, 2

# three-point Gauss-Legendre rule on [0, 1]
_GL3_X = np.array([0.5 - 0.5 * math.sqrt(0.6), 0.5, 0.5 + 0.5 * math.sqrt(0.6)])
_GL3_W = np.array([5.0 / 18.0, 8.0 / 18.0, 5.0 / 18.0])


class CertificateFailure(RuntimeError):
    """A bound became infinite."""


class NumericAbort(RuntimeError):
    """A runtime audit or the scheme itself failed."""


@dataclass
class RunSettings:
    cells: int
    T: float
    eps: float = 0.5
    delta: float = None
    model: str = "burgers"
    cfl: float = DEFAULT_CFL
    report_times: tuple = ()
    estimate: bool = True
    check: bool = True
    level_set: str = "abort"
    band_margin: float = 1.1
    pad: float = 0.05
    plot_window: tuple = (0.0, 1.0)
    plot_points: int = 801

    @property
    def h(self):
        return 1.0 / self.cells

    @property
    def step_width(self):
        return math.sqrt(self.h) if self.delta is None else float(self.delta)


# ---------------------------------------------------------------- helpers


def _hermite_defect(x0, x1, f0, f1, span, th0, th1, speed):
    """int over [th0, th1] of |d/dt p - speed(p, theta)| d theta for the cubic Hermite path."""
    tot = 0.0
    for s, w in zip(_GL3_X, _GL3_W):
        s2, s3 = s * s, s * s * s
        p = (2 * s3 - 3 * s2 + 1) * x0 + (s3 - 2 * s2 + s) * span * f0 + (-2 * s3 + 3 * s2) * x1 + (s3 - s2) * span * f1
        dp = ((6 * s2 - 6 * s) * x0 + (3 * s2 - 4 * s + 1) * span * f0 + (-6 * s2 + 6 * s) * x1 + (3 * s2 - 2 * s) * span * f1) / span
        tot += w * abs(dp - speed(p, th0 + s * (th1 - th0)))
    return tot * (th1 - th0)


def _sigma(law, a, b):
    d = a - b
    if abs(d) <= 1e-14 * (1.0 + abs(b)):
        return float(law.dA(0.5 * (a + b)))
    return float((law.A(a) - law.A(b)) / d)


def _pl_min_gap(ea, eb):
    """Exact infimum of the difference of two piecewise-linear extensions."""
    xs = np.union1d(ea.xs, eb.xs)
    return float(np.min(ea(xs) - eb(xs)))


class LineSolution:
    """Numerical solution with data slope * y, advanced in sub-steps of the outer step."""

    def __init__(self, slope, ya, yb, h, dt, model, cfl, check):
        x_lo = h * math.floor(ya / h)
        n = int(math.ceil((yb - x_lo) / h))
        vals = slope * np.array([x_lo, x_lo + n * h])
        speed = float(np.max(np.abs(model.law.dA(np.linspace(vals[0], vals[1], 201)))))
        self.sub = max(1, int(math.ceil(speed * dt / (cfl * h) * (1 + 1e-12))))
        self.grid = Grid(x_lo, n, h, dt / self.sub, cfl)
        u0 = slope * self.grid.mids
        self.sol = PieceSolution(-1, self.grid, 0, u0, model, store=False, check=check)
        self.x_lo, self.h, self.dt = x_lo, h, dt
        self.mids = self.grid.mids
        self.prev = self.u = self.sol.u
        self.dcoef = self.sol.dcoef
        self.resid = 0.0
        self.check = check
        self.lips = [self._lip(self.u)]

    def _lip(self, u):
        return float(np.max(np.abs(np.diff(u)))) / self.h

    def step(self):
        start = self.u
        for _ in range(self.sub):
            self.sol.step(accumulate=False)
        self.prev, self.u = start, self.sol.u
        if self.check and np.any(np.diff(self.u) <= 0.0):
            raise NumericAbort("line solution lost strict monotonicity")
        self.resid += K.r2_grid_sum(self.prev, self.u, self.dcoef, self.h, self.dt)
        self.lips.append(self._lip(self.u))

    def value(self, y, theta):
        a = np.interp(y, self.mids, self.prev)
        if theta == 0.0:
            return a
        b = np.interp(y, self.mids, self.u)
        return a + theta * (b - a)

    def inverse(self, v, theta=1.0):
        u = self.u if theta == 1.0 else self.prev
        return float(np.interp(v, u, self.mids))


@dataclass(frozen=True)
class Surrogate:
    """min(high, max(P, min(plateau, Lambda), low)) from two shifted line solutions."""

    plateau: float
    low: float
    high: float
    s_lam: float
    s_p: float

    def __call__(self, line, x, theta):
        lam = line.value(x - self.s_lam, theta)
        p = line.value(x - self.s_p, theta)
        return np.minimum(self.high, np.maximum(np.maximum(p, np.minimum(self.plateau, lam)), self.low))

    def active(self, line):
        """Interval outside of which the surrogate sits on one of its clamps."""
        return line.inverse(self.low) + self.s_lam, line.inverse(self.high) + self.s_p


@dataclass
class CurveBound:
    index: int
    cls: str
    orig: bool
    state: ShiftState = field(default_factory=ShiftState)
    delta: float = 0.0
    eff: float = 0.0
    floor: float = math.nan
    comps: dict = field(default_factory=dict)
    region: int = -1


@dataclass
class RegionBounds:
    first: int
    last: int
    plateaus: tuple
    traj: object
    rho: dict
    floors0: list
    params: dict
    sbar: float = 0.0
    mhat: float = 0.0
    gamma: float = 0.0
    d_inner: float = 0.0
    worst: float = 0.0
    slope: float = None
    ups: dict = field(default_factory=dict)
    max_ups: float = 0.0
    e_fine: float = 0.0

    @property
    def nsteps(self):
        return self.last - self.first + 1

    @property
    def osc(self):
        return self.plateaus[0] - self.plateaus[-1]


@dataclass
class Fictitious:
    """Continuation of two merged curves as if they had not collided."""

    kind: str
    piece: int
    t_start: float
    amb_start: float
    x: list
    pairs: list
    states: list
    classes: list
    regions: list
    deltas: list


@dataclass
class RdPair:
    region: int
    t_touch: float
    d_left: float
    d_right: float
    rho: float
    m: float = math.nan
    fired: float = math.nan


@dataclass
class UhatSnapshot:
    """Everything needed to evaluate the glued solution at one time."""

    t: float
    kinds: tuple
    plateaus: tuple
    arrays: dict
    groups: tuple

    def evaluate(self, x):
        x = np.asarray(x, dtype=float)
        pos = np.array([g[2] for g in self.groups])
        idx = np.searchsorted(pos, x, side="right")
        pieces = [self.groups[0][0]] + [g[1] + 1 for g in self.groups]
        out = np.empty_like(x)
        for slot, k in enumerate(pieces):
            m = idx == slot
            if not np.any(m):
                continue
            if self.kinds[k] == STEP:
                out[m] = self.plateaus[k]
            else:
                mids, u = self.arrays[k]
                out[m] = np.interp(x[m], mids, u)
        return out

    def nodes(self):
        xs = [self.arrays[k][0] for k in self.arrays]
        return np.concatenate(xs) if xs else np.zeros(0)


def l1_distance(a, b):
    """L1 distance of two glued solutions by common-refinement trapezoid quadrature."""
    jumps = np.array([g[2] for g in a.groups] + [g[2] for g in b.groups])
    nodes = np.concatenate([a.nodes(), b.nodes(), jumps, np.nextafter(jumps, -np.inf)])
    nodes = np.unique(nodes)
    if len(nodes) < 2:
        return 0.0
    f = np.abs(a.evaluate(nodes) - b.evaluate(nodes))
    return float(np.trapezoid(f, nodes))


@dataclass
class RunResult:
    settings: RunSettings
    rows: list
    events: list
    certificates: list
    level_set: object
    snapshot: UhatSnapshot
    plots: list
    audits: dict
    info: dict

    @property
    def final(self):
        return self.rows[-1] if self.rows else {}


# ---------------------------------------------------------------- the run


class Simulation:
    def __init__(self, entries, settings):
        self.settings = st = settings
        self.profile = classify(parse_profile(entries), st.eps)
        self.disc = insert_steps(self.profile, st.step_width)
        # extensions prolong the staircase, whose steps are flat
        self.slope = slope_m(self.disc)
        self.ext = build_extensions(self.disc, self.slope)
        lo, hi = self.ext.band()
        band = st.band_margin * max(abs(lo), abs(hi), 1e-3)
        self.model = model_by_name(st.model, band)
        self.const = self.model.const
        self.law = self.model.law
        self.amax_speed = self.const.sup_dA
        pieces = self.disc.pieces
        self.kinds = tuple(p.kind for p in pieces)
        self.npieces = len(pieces)
        self.ncurves = self.npieces - 1
        self.breaks = np.array(self.disc.breakpoints, dtype=float)
        self.orig_breaks = set(np.round(self.profile.breakpoints, 12))
        self.plateaus = tuple(
            float(e.plateau) if p.kind == STEP else math.nan for e, p in zip(self.ext, pieces)
        )
        self.cone = cone_for(list(self.profile.breakpoints), self.model, st.T)
        self._build_grid()
        self._build_line()
        self._build_curves()

    # setup ----------------------------------------------------------------

    def _build_grid(self):
        st = self.settings
        h, T = st.h, st.T
        pad = st.pad + 8 * h
        doms = {}
        for k, e in enumerate(self.ext):
            if self.kinds[k] != NND:
                continue
            sp = self.law.dA(e.ys)
            doms[k] = (
                float(e.xs[0]) + min(0.0, float(sp.min())) * T - pad,
                float(e.xs[-1]) + max(0.0, float(sp.max())) * T + pad,
            )
        # the cone only matters for the bounds
        cone = [-self.cone.S, self.cone.S] if st.estimate else []
        lo = min(cone[:1] + [d[0] for d in doms.values()])
        hi = max(cone[1:] + [d[1] for d in doms.values()])
        x_lo = h * math.floor(lo / h)
        n = int(math.ceil((hi - x_lo) / h))
        if not 0.0 < st.cfl <= 1.0:
            raise ValueError("CFL number must lie in (0, 1]")
        dt = st.cfl * h / self.amax_speed
        steps = int(math.ceil(T / dt - 1e-9))
        dt = T / steps
        self.nsteps = steps
        self.grid = Grid(x_lo, n, h, dt, st.cfl)
        self.coef, self.dcoef = flux_coeffs(self.model)
        self.pieces = {}
        for k, (a, b) in doms.items():
            c0 = max(0, int(math.floor((a - x_lo) / h)))
            c1 = min(n, int(math.ceil((b - x_lo) / h)))
            edges = x_lo + np.arange(c0, c1 + 1) * h
            u0 = self.ext[k].cell_averages(edges)
            self.pieces[k] = PieceSolution(k, self.grid, c0, u0, self.model, store=False, check=st.check)

    def _build_line(self):
        st = self.settings
        self.line = None
        self.surr = {}
        steps = [k for k, kd in enumerate(self.kinds) if kd == STEP]
        if not steps or not st.estimate:
            return
        M = self.slope
        low = min(self.ext[k].low for k in steps)
        high = max(self.ext[k].high for k in steps)
        dA = self.law.dA
        pad = st.pad + 8 * st.h
        ya = min(low, 0.0) / M + min(0.0, float(dA(min(low, 0.0)))) * st.T - pad
        yb = max(high, 0.0) / M + max(0.0, float(dA(max(high, 0.0)))) * st.T + pad
        self.line = LineSolution(M, ya, yb, st.h, self.grid.dt, self.model, st.cfl, st.check)
        for k in steps:
            e = self.ext[k]
            c = float(e.plateau)
            self.surr[k] = Surrogate(c, float(e.low), float(e.high), e.x_j - c / M, e.x_i - c / M)

    def _curve_class(self, i):
        a, b = self.kinds[i], self.kinds[i + 1]
        if a == NND and b == NND:
            return LARGE
        if a == STEP and b == STEP:
            return FRONT
        return BOUNDARY

    def _build_curves(self):
        self.const_val = {}
        for k in range(self.npieces):
            if self.kinds[k] == STEP:
                self.const_val[k] = self.plateaus[k]
            else:
                ys = self.ext[k].ys
                self.const_val[k] = float(ys[0]) if np.all(ys == ys[0]) else None
        curves = [ShockCurve(i, self._curve_class(i), float(x)) for i, x in enumerate(self.breaks)]
        self.classes = [c.cls for c in curves]
        scale = self.grid.x_hi - self.grid.x_lo
        self.cs = CurveSystem(curves, self.model, scale, value=self.uval, const=self.const_val.get)

    # piece evaluation -------------------------------------------------------

    def uval(self, k, x, theta):
        if self.kinds[k] == STEP:
            return self.plateaus[k]
        return self.pieces[k].value_scalar(x, theta)

    def pval(self, k, x, theta):
        if self.kinds[k] == STEP:
            if self.line is None:
                return np.full(np.shape(x), self.plateaus[k])
            return self.surr[k](self.line, np.asarray(x, float), theta)
        return self.pieces[k].value_between(x, theta)

    def pval_scalar(self, k, x, theta):
        if self.kinds[k] == STEP:
            return float(self.pval(k, np.array([x]), theta)[0])
        return self.pieces[k].value_scalar(x, theta)

    def piece_lip(self, k):
        if self.kinds[k] == STEP:
            return max(self.line.lips[-1], self.line.lips[-2]) if len(self.line.lips) > 1 else self.line.lips[-1]
        s = self.pieces[k]
        return max(s.lips[-1], s.lips[-2]) if len(s.lips) > 1 else s.lips[-1]

    def _mids_in(self, a, b):
        g = self.grid
        i0 = max(int(math.ceil((a - g.x_lo) / g.h - 0.5)), 0)
        i1 = min(int(math.floor((b - g.x_lo) / g.h - 0.5)), g.n - 1)
        inner = g.x_lo + (np.arange(i0, i1 + 1) + 0.5) * g.h if i1 >= i0 else np.zeros(0)
        return np.concatenate(([a], inner, [b]))

    def gap_on(self, kl, kr, a, b, thetas=(0.0, 1.0)):
        """Lower bound of v_kl - v_kr over [a, b] and the given step times."""
        if b < a:
            a = b = 0.5 * (a + b)
        xs = self._mids_in(a, b)
        best = math.inf
        for th in thetas:
            best = min(best, float(np.min(self.pval(kl, xs, th) - self.pval(kr, xs, th))))
        if self.kinds[kl] == STEP or self.kinds[kr] == STEP:
            # off-node sampling of a surrogate: subtract the Lipschitz slack
            best -= 0.5 * self.grid.h * (self.piece_lip(kl) + self.piece_lip(kr))
        return best

    # initial errors ---------------------------------------------------------

    def initial_errors(self):
        """(int eta(u0|psi0), same over NND pieces, int (u0 - psi0)^2) over the cone."""
        S = self.cone.S
        nodes = np.concatenate(
            (self._mids_in(-S, S), self.breaks, np.array(self.profile.breakpoints, dtype=float))
        )
        nodes = np.unique(nodes[(nodes >= -S) & (nodes <= S)])
        a, b = nodes[:-1], nodes[1:]
        nd, w = np.polynomial.legendre.leggauss(4)
        xs = (0.5 * (a + b))[:, None] + (0.5 * (b - a))[:, None] * nd[None, :]
        wts = (0.5 * (b - a))[:, None] * w[None, :]
        xs, wts = xs.ravel(), wts.ravel()
        exact = self.profile.value(xs)
        which = np.searchsorted(self.breaks, xs, side="right")
        approx = np.empty_like(xs)
        nnd = np.zeros(len(xs), dtype=bool)
        for k in range(self.npieces):
            m = which == k
            if not np.any(m):
                continue
            if self.kinds[k] == STEP:
                approx[m] = self.plateaus[k]
            else:
                approx[m] = self.pieces[k].value_between(xs[m], 0.0)
                nnd |= m
        ent = relative_entropy(self.model, exact, approx) * wts
        sq = (exact - approx) ** 2 * wts
        return float(ent.sum()), float(ent[nnd].sum()), float(sq.sum())

    # main loop ----------------------------------------------------------------

    def run(self):
        st = self.settings
        t_wall = time.perf_counter()
        est = st.estimate
        self.events = []
        self.certs = []
        self.rows = []
        self.plots = []
        self.audits = {"min_order_gap": math.inf, "gap_checks": 0, "gap_deficit": math.inf, "downjump_min": math.inf}
        if est:
            self._init_estimator()
        report_times = sorted(set([t for t in st.report_times if 0 < t < st.T] + [st.T]))
        rt_idx = 0
        dt = self.grid.dt
        try:
            for n in range(self.nsteps):
                t0, t1 = n * dt, (n + 1) * dt
                pos0 = self.cs.positions()
                for s in self.pieces.values():
                    s.step(accumulate=False)
                if self.line is not None:
                    self.line.step()
                nev = len(self.cs.events)
                segs = self.cs.advance(dt)
                pos1 = self.cs.positions()
                if st.check:
                    self._audit_curves(pos1)
                if est:
                    self._estimate_step(t0, t1, pos0, pos1, segs, self.cs.events[nev:])
                    if st.check:
                        self._audit_ordering(t1)
                while rt_idx < len(report_times) and t1 >= report_times[rt_idx] - 1e-12:
                    self._report(t1, report_times[rt_idx])
                    rt_idx += 1
        except (FloatingPointError, AssertionError) as exc:
            raise NumericAbort(str(exc)) from exc
        level = None
        if est and self.line is not None:
            level = self._level_set()
        snap = self.snapshot(self.nsteps * dt)
        info = {
            "h": st.h,
            "dt": dt,
            "steps": self.nsteps,
            "delta": st.step_width,
            "slope_M": self.slope,
            "band": self.model.band,
            "cone_S": self.cone.S,
            "info_speed": self.cone.s,
            "grid": [self.grid.x_lo, self.grid.x_hi, self.grid.n],
            "wall_time": time.perf_counter() - t_wall,
            "numba": K.USE_NUMBA,
        }
        if est:
            info.update(
                C=self.C,
                diss_c=self.const.diss_c,
                E0=self.E0,
                E0_nnd=self.E0_nnd,
                init_l2_sq=self.init2,
                ambiguity_time=self.ambiguity_time(),
            )
        return RunResult(
            st, self.rows, list(self.cs.events), [c.as_dict() for c in self.certs], level, snap, self.plots, self.audits, info
        )

    # estimator state ------------------------------------------------------------

    def _init_estimator(self):
        st = self.settings
        M = self.slope
        k = self.const
        neg = 0.0
        for kk, e in enumerate(self.ext):
            if self.kinds[kk] != NND or len(e.xs) < 2:
                continue
            d = np.diff(e.ys) / np.maximum(np.diff(e.xs), 1e-300)
            dmin = float(np.min(d[np.diff(e.xs) > 0], initial=0.0))
            if dmin < 0.0:
                den = 1.0 + k.amax * dmin * st.T
                neg = max(neg, math.inf if den <= 0 else -dmin / den)
        self.neg_slope = neg
        self.C = gronwall_constant(self.model, k.hmax * neg)
        self.E0, self.E0_nnd, self.init2 = self.initial_errors()
        self.R = 0.0
        self.R_nnd = 0.0
        self.zeta0 = 1.0
        self.status = [NO] * self.npieces
        self.maybe_since = [math.nan] * self.npieces
        self.fict = []
        self.rd = {}
        self.bounds = [
            CurveBound(i, self.classes[i], round(float(self.breaks[i]), 12) in self.orig_breaks)
            for i in range(self.ncurves)
        ]
        self.rho0 = [_pl_min_gap(self.ext[i], self.ext[i + 1]) for i in range(self.ncurves)]
        self.lipext = [self.ext[i].lip for i in range(self.npieces)]
        self.regions = []
        for d, (s, e) in enumerate(self.disc.regions()):
            plateaus = tuple(self.plateaus[s : e + 1])
            fronts = FrontTrackState(plateaus, tuple(self.breaks[s:e]))
            traj = ft_evolve(fronts, st.T, self.model)
            rho = {i: self.rho0[i] for i in range(s - 1, e + 1)}
            floors0 = []
            for i in (s - 1, e):
                x = self.breaks[i]
                left, right = float(self.profile.value(np.array([x - 1e-12]))[0]), float(
                    self.profile.value(np.array([x + 1e-12]))[0]
                )
                if abs(left - right) < 1e-9:
                    floors0.append(float(self.ext[i](x) - self.ext[i + 1](x)))
            sur = [self.surr[j] for j in range(s, e + 1)]
            params = {
                "U": np.array([q.high for q in sur]),
                "L": np.array([q.low for q in sur]),
                "c": np.array([q.plateau for q in sur]),
                "sp": np.array([q.s_p for q in sur]),
                "sl": np.array([q.s_lam for q in sur]),
            }
            reg = RegionBounds(s, e, plateaus, traj, rho, floors0, params, mhat=M)
            reg.sbar = self._sbar(reg, M)
            self.regions.append(reg)
            for i in range(s - 1, e + 1):
                self.bounds[i].region = d

    def _sbar(self, reg, lip):
        p = reg.params
        if len(p["c"]) < 2:
            return 0.0
        cand = [
            -np.diff(p["U"]),
            -np.diff(p["L"]),
            -np.diff(p["c"]),
            lip * np.abs(np.diff(p["sp"])),
            lip * np.abs(np.diff(p["sl"])),
        ]
        return float(max(np.max(c) for c in cand))

    def _candidates(self, i):
        """Possible left and right pieces of curve i in the glued comparison function."""
        left, k = [], i
        while True:
            if self.status[k] != YES:
                left.append(k)
            if k == 0 or self.status[k] == NO:
                break
            k -= 1
        right, k = [], i + 1
        while True:
            if self.status[k] != YES:
                right.append(k)
            if k == self.npieces - 1 or self.status[k] == NO:
                break
            k += 1
        return left, right

    # one estimator step ---------------------------------------------------------

    def _estimate_step(self, t0, t1, pos0, pos1, segs, new_events):
        st = self.settings
        dt = t1 - t0
        a = self.amax_speed
        law = self.law
        lips = [max(s.lips[-1], s.lips[-2]) for s in self.pieces.values()]
        if self.line is not None:
            lips.append(max(self.line.lips[-1], self.line.lips[-2]))
        beta = self.const.amax * max(lips + [0.0])
        self.zeta0 *= math.exp(beta * dt)

        self._accumulate_residual(t0, t1, pos0, pos1)
        kfac = entropy_factor(self.C, self.const.diss_c, t1, self.E0, self.R)
        self._update_regions(t1)

        # speed defects per curve from the Hermite segments
        defect = np.zeros(self.ncurves)
        for first, last, th0, th1, x0, x1, f0, f1 in segs:
            if th1 <= th0:
                continue
            kl, kr = first, last + 1
            if self.const_val[kl] is not None and self.const_val[kr] is not None:
                continue
            span = (th1 - th0) * dt
            val = _hermite_defect(
                x0, x1, f0, f1, span, th0, th1,
                lambda x, th: _sigma(law, self.uval(kl, x, th), self.uval(kr, x, th)),
            )
            defect[first : last + 1] += val

        for cb in self.bounds:
            i = cb.index
            if cb.cls == FRONT:
                self._front_delta(cb, pos1)
                continue
            g = self.cs.group_of(i)
            lc, rc = self._candidates(i)
            alpha_b = self._pair_term(cb, g, lc, rc, pos0[i], pos1[i])
            lt, rt = max(lc), min(rc)
            xi = float(self.breaks[i])
            reach = a * t1
            rough = cb.delta + 2 * a * dt
            worst = self.regions[cb.region].worst if cb.cls == BOUNDARY else 0.0

            def gap(lo, hi, lt=lt, rt=rt, xi=xi, reach=reach):
                return self.gap_on(lt, rt, max(lo, xi - reach), min(hi, xi + reach))

            def dfor(floor, cb=cb, alpha_a=defect[i], alpha_b=alpha_b, worst=worst):
                fa, fb, z2, zs = cb.state.trial(alpha_a, alpha_b, floor, beta, dt)
                if cb.cls == BOUNDARY:
                    d, comps = boundary_delta(fa, fb, z2, kfac, self.zeta0, worst)
                else:
                    d, comps = delta_large(zs, cb.state.offset, fa, fb, z2, kfac)
                dfor.last = (fa, fb, z2, zs, comps)
                return d

            centre = (min(pos0[i], pos1[i]), max(pos0[i], pos1[i]))
            floor, d, _ = shock_size_fixpoint(gap, dfor, centre, rough)
            if floor <= 0.0 or not math.isfinite(d):
                d = math.inf
                self.events.append(("floor_collapse", t1, i))
            else:
                fa, fb, z2, zs, comps = dfor.last
                cb.state.commit(fa, fb, z2, zs)
                cb.comps = comps
            cb.floor = floor
            cb.delta = max(cb.delta, d)

        self._certificates(t0, t1, dt, beta, kfac, new_events)
        self._effective_deltas()
        self._update_status(t1, pos1)

    def _effective_deltas(self):
        """Curves joined by certified-collapsed pieces coincide: intersect their intervals."""
        i = 0
        while i < self.ncurves:
            j = i
            while j + 1 < self.ncurves and self.status[j + 1] == YES:
                j += 1
            eff = min(self.bounds[q].delta for q in range(i, j + 1))
            for q in range(i, j + 1):
                self.bounds[q].eff = eff
            i = j + 1

    def _pair_term(self, cb, g, lc, rc, x0, x1):
        """Speed uncertainty from ambiguous neighbours at both ends of the step."""
        lh, rh = g.left, g.right
        if cb.cls == BOUNDARY:
            outside_left = self.kinds[cb.index] == NND
            cands = lc if outside_left else rc
            hat = lh if outside_left else rh
            if len(cands) == 1 and cands[0] == hat:
                return 0.0
            worst = 0.0
            for x, th in ((x0, 0.0), (x1, 1.0)):
                ref = self.uval(hat, x, th)
                for k in {min(cands), max(cands)}:
                    worst = max(worst, abs(ref - self.pval_scalar(k, x, th)))
            return self.const.amax * worst
        if lc == [lh] and rc == [rh]:
            return 0.0
        worst = 0.0
        for x, th in ((x0, 0.0), (x1, 1.0)):
            s_hat = _sigma(self.law, self.uval(lh, x, th), self.uval(rh, x, th))
            lv = {k: self.pval_scalar(k, x, th) for k in {min(lc), max(lc)}}
            rv = {k: self.pval_scalar(k, x, th) for k in {min(rc), max(rc)}}
            for u in lv.values():
                for w in rv.values():
                    worst = max(worst, abs(s_hat - _sigma(self.law, u, w)))
        return min(worst, 2.0 * self.amax_speed)

    def _front_delta(self, cb, pos):
        reg = self.regions[cb.region]
        g = self.cs.group_of(cb.index)
        d = reg.worst
        if all(self.classes[j] == FRONT for j in range(g.first, g.last + 1)):
            inner = [pos[j] for j in range(reg.first, reg.last) if self.classes[j] == FRONT]
            grp = [
                gg for gg in self.cs.groups
                if gg.first >= reg.first and gg.last <= reg.last - 1
            ]
            if len(grp) >= 2:
                lo, hi = min(inner), max(inner)
                if pos[cb.index] - reg.d_inner >= lo and pos[cb.index] + reg.d_inner <= hi:
                    d = reg.d_inner
        cb.delta = max(cb.delta, d)
        cb.eff = cb.delta
        cb.comps = {"inner": reg.d_inner, "worst": reg.worst}

    # residual ------------------------------------------------------------------

    def _accumulate_residual(self, t0, t1, pos0, pos1):
        g = self.grid
        a = self.amax_speed
        dt = t1 - t0
        lo_c, hi_c = self.cone.at(t0)
        wins = []
        for k in range(self.npieces):
            if self.status[k] == YES:
                continue
            lo, hi = lo_c, hi_c
            if k > 0:
                i = k - 1
                lo = max(lo, min(pos0[i], pos1[i]) - self.bounds[i].eff - 2 * a * dt)
            if k < self.ncurves:
                lo_i = k
                hi = min(hi, max(pos0[lo_i], pos1[lo_i]) + self.bounds[lo_i].eff + 2 * a * dt)
            if hi <= lo:
                continue
            g0 = max(g.interval_of(lo), 0)
            g1 = min(g.interval_of(hi) + 1, g.n - 1)
            if g1 > g0:
                wins.append((k, g0, g1))
        if not wins:
            return
        gmin = min(w[1] for w in wins)
        gmax = max(w[2] for w in wins)
        if not hasattr(self, "_buf"):
            self._buf = np.zeros((g.n, 4))
        buf = self._buf
        buf[gmin:gmax] = 0.0
        for k, g0, g1 in wins:
            if self.kinds[k] == NND:
                s = self.pieces[k]
                K.r2_grid_max(buf, s.prev, s.u, s.lo, g0, g1, self.dcoef, g.h, dt)
        part = 0.25 * g.h * dt * float(buf[gmin:gmax].sum())
        self.R_nnd += part
        if self.line is not None:
            ln = self.line
            for k, g0, g1 in wins:
                if self.kinds[k] != STEP:
                    continue
                q = self.surr[k]
                K.r2_line_max(
                    buf, ln.prev, ln.u, ln.x_lo, g.x_lo, g0, g1, q.plateau, q.s_lam, q.s_p, q.low, q.high,
                    self.dcoef, g.h, dt,
                )
            part = 0.25 * g.h * dt * float(buf[gmin:gmax].sum())
        self.R += part

    # front-tracking regions ---------------------------------------------------------

    def _update_regions(self, t):
        st = self.settings
        k = self.const
        if not self.regions:
            return
        lip_line = self.line.lips[-1]
        kfac_full = entropy_factor(self.C, k.diss_c, t, self.E0, self.R)
        for reg in self.regions:
            reg.mhat = max(reg.mhat, lip_line)
            reg.sbar = max(reg.sbar, self._sbar(reg, lip_line))
            ups = {}
            for i, rho in reg.rho.items():
                floor = gap_bound(rho, self.slope, t, k.amax)
                e_fine = fine_initial_entropy(k.hmax, st.step_width, rho, reg.floors0, self.E0_nnd)
                reg.e_fine = max(reg.e_fine, e_fine)
                kf = entropy_factor(self.C, k.diss_c, t, e_fine, self.R_nnd)
                ups[i] = upsilon(t, floor, kf, reg.sbar, k.amax)
            reg.ups = ups
            inner = [ups[i] for i in range(reg.first, reg.last)]
            reg.max_ups = max(inner) if inner else 0.0
            gam = gamma(t, reg.osc, reg.nsteps, reg.mhat, reg.max_ups, kfac_full, k.amax)
            reg.gamma = max(reg.gamma, gam)
            state = reg.traj.state_at(t)
            alive = len(state.positions)
            reg.slope = discrete_slope(state, st.step_width) if alive >= 2 else None
            reg.d_inner = delta_inner(reg.gamma, reg.slope, st.eps)
            reg.worst = worst_case(reg.d_inner, k.amax, reg.mhat, st.T, reg.max_ups, reg.gamma)

    # certificates -----------------------------------------------------------------

    def _certificates(self, t0, t1, dt, beta, kfac, new_events):
        for t, pf, pl, gf, gl in new_events:
            self.events.append(("merge", t, pf, pl, gf, gl))
            k = gf
            if self.kinds[k] == NND and self.status[k] != YES:
                self._start_fictitious(k, t)
            elif self.kinds[k] == STEP:
                grp = self.cs.group_of(gf)
                for d, reg in enumerate(self.regions):
                    if d in self.rd:
                        continue
                    if grp.first <= reg.first - 1 and grp.last >= reg.last:
                        self.rd[d] = RdPair(
                            d, t, self.bounds[reg.first - 1].eff, self.bounds[reg.last].eff, math.inf
                        )
        for fc in list(self.fict):
            self._advance_fictitious(fc, t1, dt, beta, kfac)
        for d, pr in self.rd.items():
            if not math.isnan(pr.fired):
                continue
            reg = self.regions[d]
            kl, kr = reg.first - 1, reg.last + 1
            sl, sr = self.pieces[kl], self.pieces[kr]
            lo = min(sl.lo, sr.lo)
            hi = max(sl.hi, sr.hi)
            pr.rho = min(pr.rho, float(K.min_gap(sl.u, sl.lo, sr.u, sr.lo, lo, hi)))
            if pr.rho <= 0.0:
                continue
            pr.m = speed_gap_m(self.model, pr.rho)
            ul, ur = reg.ups[kl], reg.ups[reg.last]
            if rd_pair_certified(pr.m, t1, pr.t_touch, pr.d_left, pr.d_right, ul, ur):
                pr.fired = t1
                amb = np.nanmin([self.maybe_since[j] for j in range(reg.first, reg.last + 1)] + [pr.t_touch])
                for j in range(reg.first, reg.last + 1):
                    self.status[j] = YES
                d0 = min(self.bounds[kl].delta, self.bounds[reg.last].delta)
                for i in range(kl, reg.last + 1):
                    cb = self.bounds[i]
                    cb.cls = LARGE
                    cb.state = ShiftState(offset=d0)
                    cb.delta = d0
                self.certs.append(CertificateEvent("rd_pair", d, pr.t_touch, t1, float(amb)))

    def _start_fictitious(self, k, t):
        a, b = k - 1, k
        lc, _ = self._candidates(a)
        _, rc = self._candidates(b)
        la, rb = max(lc), min(rc)
        ca, cb_ = self.bounds[a], self.bounds[b]
        kind = "large" if LARGE in (ca.cls, cb_.cls) else "nnd_boundary"
        x = float(self.cs.group_of(a).x)
        amb = self.maybe_since[k] if not math.isnan(self.maybe_since[k]) else t
        self.fict.append(
            Fictitious(
                kind, k, t, amb, [x, x], [(la, k), (k, rb)], [ca.state.copy(), cb_.state.copy()],
                [ca.cls, cb_.cls], [ca.region, cb_.region], [ca.delta, cb_.delta],
            )
        )

    def _advance_fictitious(self, fc, t1, dt, beta, kfac):
        a = self.amax_speed
        law = self.law
        for side in (0, 1):
            kl, kr = fc.pairs[side]

            def speed(x, th, kl=kl, kr=kr):
                return _sigma(law, self.pval_scalar(kl, x, th), self.pval_scalar(kr, x, th))

            x0 = fc.x[side]
            k1 = speed(x0, 0.0)
            k2 = speed(x0 + 0.5 * dt * k1, 0.5)
            k3 = speed(x0 + 0.5 * dt * k2, 0.5)
            k4 = speed(x0 + dt * k3, 1.0)
            x1 = x0 + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
            f1 = speed(x1, 1.0)
            alpha_a = _hermite_defect(x0, x1, k1, f1, dt, 0.0, 1.0, speed)
            st_ = fc.states[side]
            cls = fc.classes[side]
            worst = self.regions[fc.regions[side]].worst if cls == BOUNDARY else 0.0

            def dfor(floor, st_=st_, cls=cls, alpha_a=alpha_a, worst=worst):
                fa, fb, z2, zs = st_.trial(alpha_a, 0.0, floor, beta, dt)
                if cls == BOUNDARY:
                    d, _ = boundary_delta(fa, fb, z2, kfac, self.zeta0, worst)
                else:
                    d, _ = delta_large(zs, st_.offset, fa, fb, z2, kfac)
                dfor.last = (fa, fb, z2, zs)
                return d

            def gap(lo, hi, kl=kl, kr=kr):
                return self.gap_on(kl, kr, lo, hi)

            rough = fc.deltas[side] + 2 * a * dt
            floor, d, _ = shock_size_fixpoint(gap, dfor, (min(x0, x1), max(x0, x1)), rough)
            if floor > 0.0 and math.isfinite(d):
                st_.commit(*dfor.last)
            else:
                d = math.inf
            fc.deltas[side] = max(fc.deltas[side], d)
            fc.x[side] = x1
        if fc.x[0] - fc.deltas[0] > fc.x[1] + fc.deltas[1]:
            self.status[fc.piece] = YES
            self.certs.append(CertificateEvent(fc.kind, fc.piece, fc.t_start, t1, fc.amb_start))
            self.fict.remove(fc)

    def _update_status(self, t, pos):
        for k in range(1, self.npieces - 1):
            if self.status[k] == YES:
                continue
            i, j = k - 1, k
            overlap = pos[i] + self.bounds[i].eff >= pos[j] - self.bounds[j].eff
            new = MAYBE if overlap else NO
            if new == MAYBE and self.status[k] == NO:
                self.maybe_since[k] = t
            if new == NO:
                self.maybe_since[k] = math.nan
            self.status[k] = new

    def ambiguity_time(self):
        return float(sum(c.t_fire - c.ambiguity_start for c in self.certs))

    # audits -------------------------------------------------------------------------

    def _audit_curves(self, pos):
        if np.any(np.diff(pos) < 0.0):
            raise NumericAbort("shock curves out of order")
        for g in self.cs.groups:
            jump = self.uval(g.left, g.x, 1.0) - self.uval(g.right, g.x, 1.0)
            self.audits["downjump_min"] = min(self.audits["downjump_min"], jump)
            if jump <= 0.0:
                raise NumericAbort(f"no down-jump at curve group {g.first}..{g.last}")

    def _audit_ordering(self, t):
        g = self.grid
        k = self.const
        for i in range(self.ncurves):
            a, b = i, i + 1
            if self.kinds[a] == NND and self.kinds[b] == NND:
                sa, sb = self.pieces[a], self.pieces[b]
                gap = float(K.min_gap(sa.u, sa.lo, sb.u, sb.lo, min(sa.lo, sb.lo), max(sa.hi, sb.hi)))
                bound = gap_bound(self.rho0[i], min(self.lipext[a], self.lipext[b]), t, k.amax)
                self.audits["gap_checks"] += 1
                scaled = (gap - bound) / (g.h * self.slope)
                self.audits["gap_deficit"] = min(self.audits["gap_deficit"], scaled)
            else:
                spans = []
                for q in (a, b):
                    if self.kinds[q] == NND:
                        s = self.pieces[q]
                        spans.append((s.mids[0], s.mids[-1]))
                    else:
                        spans.append(self.surr[q].active(self.line))
                lo = min(x[0] for x in spans) - g.h
                hi = max(x[1] for x in spans) + g.h
                xs = self._mids_in(lo, hi)
                gap = float(np.min(self.pval(a, xs, 1.0) - self.pval(b, xs, 1.0)))
            self.audits["min_order_gap"] = min(self.audits["min_order_gap"], gap)
            if gap <= 0.0:
                raise NumericAbort(f"pieces {a} and {b} lost their ordering at t={t:.6g}")

    # reports ---------------------------------------------------------------------------

    def snapshot(self, t):
        arrays = {k: (s.mids.copy(), s.u.copy()) for k, s in self.pieces.items()}
        groups = tuple((g.first, g.last, float(g.x)) for g in self.cs.groups)
        return UhatSnapshot(t, self.kinds, self.plateaus, arrays, groups)

    def _report(self, t, requested):
        """Row and plot data at the first step end t at or after the requested time."""
        st = self.settings
        snap = self.snapshot(t)
        xs = np.linspace(st.plot_window[0], st.plot_window[1], st.plot_points)
        plot = {"t": t, "requested": requested, "x": xs, "u": snap.evaluate(xs), "curves": snap.groups}
        row = {"t": t, "requested": requested}
        if st.estimate:
            plot["deltas"] = [cb.eff for cb in self.bounds]
            row.update(self._bounds_row(t))
        self.plots.append(plot)
        self.rows.append(row)

    def _bounds_row(self, t):
        k = self.const
        sq, root = l2_bound(self.C, self.init2, self.R, t)
        lo_c, hi_c = self.cone.at(t)
        pos = self.cs.positions()
        intervals = []
        for cb in self.bounds:
            if not cb.orig:
                continue
            if not math.isfinite(cb.eff):
                intervals = None
                break
            a, b = max(pos[cb.index] - cb.eff, lo_c), min(pos[cb.index] + cb.eff, hi_c)
            if b > a:
                intervals.append((cb.index, a, b))
        if intervals is None:
            bint = math.inf
        else:
            samples = self._mids_in(lo_c, hi_c)
            bint = uncertainty_integral(intervals, lambda q, x: self.pval(q, x, 1.0), samples)
        regs = [(r.gamma, r.mhat * r.max_ups) for r in self.regions]
        width = hi_c - lo_c
        l1, psi = l1_bound(bint, regs, self.cone.S, root, width)
        big = [cb.eff for cb in self.bounds if cb.cls != FRONT]
        row = {
            "R": self.R,
            "R_nnd": self.R_nnd,
            "l2_sq": sq,
            "l2": root,
            "B_integral": bint,
            "l1_psi": psi,
            "l1": l1,
            "max_delta": max(big) if big else 0.0,
            "deltas": [cb.eff for cb in self.bounds],
            "own_deltas": [cb.delta for cb in self.bounds],
            "classes": [cb.cls for cb in self.bounds],
            "components": [dict(cb.comps) for cb in self.bounds],
            "floors": [cb.floor for cb in self.bounds],
            "status": list(self.status),
        }
        if self.regions:
            # same Gronwall bound started from the finest staircase of each region
            e_fine = max(r.e_fine for r in self.regions)
            _, root_fine = l2_bound(self.C, e_fine / k.cstar, self.R, t)
            row.update(
                l2_fine=root_fine,
                upsilon=max(r.max_ups for r in self.regions),
                gamma=max(r.gamma for r in self.regions),
                delta_inner=max(r.d_inner for r in self.regions),
                worst=max(r.worst for r in self.regions),
                mhat=max(r.mhat for r in self.regions),
                sbar=max(r.sbar for r in self.regions),
            )
        return row

    def _level_set(self):
        st = self.settings
        ln = self.line
        k = self.const
        decay = 1.0 / (1.0 + k.amax * self.slope * st.T)
        gap = st.eps * st.step_width / (2.0 * self.slope) * decay
        res = level_set_check(ln, math.sqrt(ln.resid), gap, self.model, st.T)
        self.events.append(("level_set", st.T, res.passed, res.margin))
        if not res.passed and st.level_set == "abort":
            raise CertificateFailure(
                f"level-set check failed (error {res.position_error:.3g} > gap {gap:.3g}); refine h"
            )
        return res


def run(entries, settings):
    return Simulation(entries, settings).run()
