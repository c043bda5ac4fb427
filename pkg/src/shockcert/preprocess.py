"""Classification of piecewise-affine initial data and its Lipschitz extensions.

Initial data are a left-to-right list of affine segments covering the line.
Segments are grouped into nearly non-decreasing (NND) pieces, whose slopes stay
above -eps, and rapidly decreasing (RD) pieces, whose slopes are at most -eps.
RD pieces are replaced by staircases of width about delta, and every piece of
the resulting profile is prolonged to a global Lipschitz function so that the
prolongations are strictly ordered.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

NND = "NND"
RD = "RD"
STEP = "STEP"

# cap on the run length of the linear continuation next to a jump
RUN_CAP = 1.0

_TOL = 1e-12


@dataclass(frozen=True)
class Segment:
    """Affine function c0 + c1 x on (a, b)."""

    a: float
    b: float
    c0: float
    c1: float

    def value(self, x):
        return self.c0 + self.c1 * x

    @property
    def left(self):
        return self.value(self.a) if math.isfinite(self.a) else self.c0

    @property
    def right(self):
        return self.value(self.b) if math.isfinite(self.b) else self.c0


@dataclass(frozen=True)
class Piece:
    """Continuous piecewise-affine function on (a, b) with a class label."""

    segments: tuple
    kind: str
    region: int = -1

    @property
    def a(self):
        return self.segments[0].a

    @property
    def b(self):
        return self.segments[-1].b

    @property
    def left_value(self):
        return self.segments[0].left

    @property
    def right_value(self):
        return self.segments[-1].right

    @property
    def left_slope(self):
        return self.segments[0].c1

    @property
    def right_slope(self):
        return self.segments[-1].c1

    @property
    def lip(self):
        return max(abs(s.c1) for s in self.segments)

    @property
    def min_slope(self):
        return min(s.c1 for s in self.segments)

    def nodes(self):
        """Interior nodes (x, value) of the piece, finite endpoints included."""
        xs, ys = [], []
        for s in self.segments:
            if math.isfinite(s.a):
                xs.append(s.a)
                ys.append(s.left)
        if math.isfinite(self.b):
            xs.append(self.b)
            ys.append(self.right_value)
        return xs, ys

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for s in self.segments:
            m = (x >= s.a) & (x <= s.b)
            out[m] = s.value(x[m])
        return out

    def extreme_values(self):
        vals = [s.left for s in self.segments] + [self.right_value]
        return min(vals), max(vals)


@dataclass(frozen=True)
class StepApproximation:
    """Staircase replacing one RD piece."""

    parent: Piece
    delta: float
    width: float
    plateaus: tuple
    breakpoints: tuple

    @property
    def jumps(self):
        return tuple(np.diff(self.plateaus) * -1.0)


@dataclass(frozen=True)
class SegmentedProfile:
    """Classified initial data: pieces separated by the breakpoints x_1..x_N."""

    pieces: tuple
    eps: float

    @property
    def breakpoints(self):
        return tuple(p.b for p in self.pieces[:-1])

    @property
    def jumps(self):
        return tuple(
            self.pieces[k].right_value - self.pieces[k + 1].left_value
            for k in range(len(self.pieces) - 1)
        )

    @property
    def n_breaks(self):
        return len(self.pieces) - 1

    def value(self, x):
        x = np.asarray(x, dtype=float)
        out = np.empty_like(x)
        for p in self.pieces:
            m = (x >= p.a) & (x < p.b)
            out[m] = p.value(x[m])
        return out

    def regions(self):
        """Index ranges [first, last] of RD or STEP runs."""
        out = []
        k = 0
        n = len(self.pieces)
        while k < n:
            if self.pieces[k].kind in (RD, STEP):
                j = k
                while j + 1 < n and self.pieces[j + 1].kind == self.pieces[k].kind:
                    j += 1
                out.append((k, j))
                k = j + 1
            else:
                k += 1
        return out


def parse_profile(entries):
    """Build segments from (a, b, kind, coeffs) tuples.

    kind 'const' takes one coefficient (the value); kind 'affine' takes
    (c0, c1) for c0 + c1 x.
    """
    segs = []
    for a, b, kind, coeffs in entries:
        if kind == "const":
            segs.append(Segment(float(a), float(b), float(coeffs[0]), 0.0))
        elif kind == "affine":
            segs.append(Segment(float(a), float(b), float(coeffs[0]), float(coeffs[1])))
        else:
            raise ValueError(f"unknown segment kind {kind!r}")
    if segs[0].a != -math.inf or segs[-1].b != math.inf:
        raise ValueError("profile must cover the whole line")
    for s, t in zip(segs, segs[1:]):
        if abs(s.b - t.a) > _TOL:
            raise ValueError("segments must be contiguous")
    for s in (segs[0], segs[-1]):
        if s.c1 != 0.0:
            raise ValueError("unbounded outer segments are not allowed")
    return segs


def classify(segments, eps):
    """Group segments into NND and RD pieces separated by down-jumps."""
    if eps <= 0.0:
        raise ValueError("eps must be positive")
    labels = [RD if s.c1 <= -eps else NND for s in segments]
    pieces = []
    cur = [segments[0]]
    for k in range(1, len(segments)):
        prev, s = segments[k - 1], segments[k]
        jump = prev.right - s.left
        if jump < -_TOL:
            raise ValueError(f"up-jump at x={s.a}")
        if labels[k] == labels[k - 1] and abs(jump) <= _TOL:
            cur.append(s)
        else:
            pieces.append(Piece(tuple(cur), labels[k - 1]))
            cur = [s]
    pieces.append(Piece(tuple(cur), labels[-1]))
    for p, q in zip(pieces, pieces[1:]):
        if p.kind == NND and q.kind == NND and p.right_value - q.left_value <= _TOL:
            raise ValueError("adjacent NND pieces need a strict down-jump")
    return SegmentedProfile(tuple(pieces), float(eps))


def discretize_rd(piece, delta, eps=None):
    """Staircase with ceil(length/delta) equal steps, valued at step midpoints."""
    if delta <= 0.0:
        raise ValueError("delta must be positive")
    length = piece.b - piece.a
    if delta >= length:
        warnings.warn("delta exceeds the RD piece length, using a single step")
        n = 1
    else:
        n = math.ceil(length / delta - 1e-12)
    width = length / n
    edges = piece.a + width * np.arange(n + 1)
    edges[-1] = piece.b
    mids = 0.5 * (edges[:-1] + edges[1:])
    plateaus = piece.value(mids)
    jumps = -np.diff(plateaus)
    if np.any(jumps <= 0.0):
        raise ValueError("staircase is not strictly decreasing")
    if eps is not None and n > 1:
        lo = eps * width * (1 - 1e-9)
        hi = piece.lip * max(delta, width) * (1 + 1e-9)
        if np.any(jumps < lo) or np.any(jumps > hi):
            raise AssertionError("step jump outside its admissible window")
    return StepApproximation(
        piece, float(delta), float(width), tuple(plateaus), tuple(edges[1:-1])
    )


def insert_steps(profile, delta):
    """Replace every RD piece by its staircase; consecutive RD pieces share a region."""
    out = []
    region = -1
    prev_rd = False
    for p in profile.pieces:
        if p.kind != RD:
            out.append(p)
            prev_rd = False
            continue
        if not prev_rd:
            region += 1
        prev_rd = True
        st = discretize_rd(p, delta, profile.eps)
        edges = (p.a,) + st.breakpoints + (p.b,)
        for k, c in enumerate(st.plateaus):
            seg = Segment(edges[k], edges[k + 1], float(c), 0.0)
            out.append(Piece((seg,), STEP, region))
    return SegmentedProfile(tuple(out), profile.eps)


def slope_m(profile):
    """M = max(1, largest Lipschitz constant over the pieces)."""
    return max([1.0] + [p.lip for p in profile.pieces])


@dataclass(frozen=True)
class Extension:
    """Global piecewise-linear prolongation of one piece (constant beyond the nodes)."""

    index: int
    kind: str
    xs: np.ndarray
    ys: np.ndarray
    # for staircase pieces: plateau, anchors of the two ramps and the clamps
    plateau: float = math.nan
    x_j: float = math.nan
    x_i: float = math.nan
    low: float = math.nan
    high: float = math.nan
    region: int = -1

    def __call__(self, x):
        return np.interp(np.asarray(x, dtype=float), self.xs, self.ys)

    @property
    def lip(self):
        if len(self.xs) < 2:
            return 0.0
        dx = np.diff(self.xs)
        ok = dx > 0
        return float(np.max(np.abs(np.diff(self.ys)[ok] / dx[ok]), initial=0.0))

    def cell_averages(self, edges):
        """Exact averages of the piecewise-linear function over cells."""
        f = pl_antiderivative(self.xs, self.ys, edges)
        return np.diff(f) / np.diff(edges)


@dataclass(frozen=True)
class ExtensionSet:
    profile: SegmentedProfile
    slope: float
    ext: tuple

    def __len__(self):
        return len(self.ext)

    def __getitem__(self, k):
        return self.ext[k]

    def band(self):
        lo = min(float(e.ys.min()) for e in self.ext)
        hi = max(float(e.ys.max()) for e in self.ext)
        return lo, hi


def pl_antiderivative(xs, ys, x):
    """Integral from xs[0] to x of the piecewise-linear interpolant (constant tails)."""
    xs = np.asarray(xs, float)
    ys = np.asarray(ys, float)
    x = np.asarray(x, float)
    if len(xs) == 1:
        return (x - xs[0]) * ys[0]
    cum = np.concatenate(([0.0], np.cumsum(0.5 * (ys[1:] + ys[:-1]) * np.diff(xs))))
    out = np.empty_like(x)
    left = x <= xs[0]
    right = x >= xs[-1]
    mid = ~(left | right)
    out[left] = (x[left] - xs[0]) * ys[0]
    out[right] = cum[-1] + (x[right] - xs[-1]) * ys[-1]
    xm = x[mid]
    j = np.clip(np.searchsorted(xs, xm, side="right") - 1, 0, len(xs) - 2)
    dx = xs[j + 1] - xs[j]
    w = np.where(dx > 0, (xm - xs[j]) / np.where(dx > 0, dx, 1.0), 0.0)
    val = ys[j] + w * (ys[j + 1] - ys[j])
    out[mid] = cum[j] + 0.5 * (ys[j] + val) * (xm - xs[j])
    return out


def _dedupe(xs, ys):
    ox, oy = [xs[0]], [ys[0]]
    for x, y in zip(xs[1:], ys[1:]):
        if x - ox[-1] <= 1e-14 * max(1.0, abs(x)):
            if abs(y - oy[-1]) > 1e-9:
                raise AssertionError("discontinuous extension")
            continue
        ox.append(x)
        oy.append(y)
    return np.array(ox), np.array(oy)


def build_extensions(profile, slope=None, run_cap=RUN_CAP, check=True):
    """Ordered Lipschitz prolongations v_1 .. v_{N+1} of the pieces."""
    pieces = profile.pieces
    n = len(pieces) - 1
    m = slope_m(profile) if slope is None else float(slope)
    x = profile.breakpoints
    jump = profile.jumps
    if any(j <= 0.0 for j in jump):
        raise ValueError("every breakpoint needs a strict down-jump")
    dminus = [pieces[k].right_slope for k in range(n)]
    dplus = [pieces[k + 1].left_slope for k in range(n)]
    x_i = [x[k] + min(run_cap, jump[k] / (2.0 * (m + abs(dminus[k])))) for k in range(n)]
    x_j = [x[k] - min(run_cap, jump[k] / (2.0 * (m + abs(dplus[k])))) for k in range(n)]
    lows = [p.extreme_values()[0] for p in pieces]
    highs = [p.extreme_values()[1] for p in pieces]
    out = []
    for k, p in enumerate(pieces):
        xs, ys = p.nodes()
        info = {}
        if k < n:
            v_i = p.right_value + (x_i[k] - x[k]) * dminus[k]
            sup_right = max(highs[k + 1 :])
            extra = sum(jump[k:]) + sum(
                (x_i[j] - x[j]) * abs(dminus[j]) for j in range(k + 1, n)
            )
            high = max(v_i, sup_right + extra)
            x_r = x_i[k] + (high - v_i) / m
            xs = xs + [x_i[k], x_r]
            ys = ys + [v_i, high]
            info.update(x_i=x_i[k], high=high)
        if k > 0:
            b = k - 1
            v_j = p.left_value + (x_j[b] - x[b]) * dplus[b]
            inf_left = min(lows[:k])
            extra = sum(jump[:k]) + sum(
                (x[j] - x_j[j]) * abs(dplus[j]) for j in range(0, b)
            )
            low = min(v_j, inf_left - extra)
            x_l = x_j[b] - (v_j - low) / m
            xs = [x_l, x_j[b]] + xs
            ys = [low, v_j] + ys
            info.update(x_j=x_j[b], low=low)
        if not xs:
            xs, ys = [0.0], [p.left_value]
        xa, ya = _dedupe(xs, ys)
        if p.kind == STEP:
            e = Extension(
                k, p.kind, xa, ya, plateau=p.left_value, region=p.region, **info
            )
        else:
            e = Extension(k, p.kind, xa, ya, region=p.region, **info)
        out.append(e)
    ext = ExtensionSet(profile, m, tuple(out))
    if check:
        check_ordering(ext)
    return ext


def check_ordering(ext, samples=1000):
    """Assert v_k - v_{k+1} >= jump_k / 2 on a dense sample plus all nodes."""
    jumps = ext.profile.jumps
    allx = np.concatenate([e.xs for e in ext.ext])
    lo, hi = allx.min() - 1.0, allx.max() + 1.0
    grid = np.concatenate([np.linspace(lo, hi, samples), allx])
    for k, jmp in enumerate(jumps):
        gap = ext[k](grid) - ext[k + 1](grid)
        if gap.min() < 0.5 * jmp * (1 - 1e-9):
            raise AssertionError(f"extensions {k} and {k + 1} violate the ordering gap")
    return True
