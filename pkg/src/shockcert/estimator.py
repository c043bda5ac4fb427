"""Computable error bounds: shift uncertainties, front-tracking budgets, L2 and L1.

Time integrals weighted by zeta(t, s) = exp(int_s^t amax maxLip dr) are kept as
running accumulators F <- F e^{beta dt} + alpha dt e^{beta dt}, so the weight of
every past step is updated in O(1) per step.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .model import rh_speed


def gronwall_step(F, alpha, beta, dt):
    """F e^{beta dt} + alpha dt e^{beta dt}."""
    g = math.exp(beta * dt)
    return F * g + alpha * dt * g


@dataclass
class GronwallAccumulator:
    """Running value of int_0^t zeta(t, s)^p alpha(s) ds on a step grid."""

    value: float = 0.0
    power: int = 1

    def step(self, alpha, beta, dt):
        self.value = gronwall_step(self.value, alpha, self.power * beta, dt)
        return self.value

    def grow(self, beta, dt):
        self.value *= math.exp(self.power * beta * dt)
        return self.value

    def copy(self):
        return GronwallAccumulator(self.value, self.power)


def gronwall_direct(alphas, betas, dt, power=1):
    """Direct double sum of the accumulator recurrence (oracle form)."""
    n = len(alphas)
    total = 0.0
    for i in range(n):
        expo = power * dt * sum(betas[i:])
        total += alphas[i] * dt * math.exp(expo)
    return total


def zeta(t, s_from, lips, dt, amax):
    """exp(int_{s_from}^t amax max-Lip dr) for a piecewise-constant per-step history."""
    if s_from > t:
        raise ValueError("s_from must not exceed t")
    lips = np.asarray(lips, float)
    edges = np.arange(len(lips) + 1) * dt
    lo = np.clip(edges[:-1], s_from, t)
    hi = np.clip(edges[1:], s_from, t)
    return math.exp(amax * float(np.sum(lips * (hi - lo))))


def entropy_factor(C, c, t, e0, resid):
    """sqrt(C/c e^{Ct} (E0 + R)): bound on sqrt(int floor (speed error)^2)."""
    return math.sqrt(max(C / c * math.exp(C * t) * (e0 + resid), 0.0))


@dataclass
class ShiftState:
    """Accumulators behind the position uncertainty of one curve."""

    defect: GronwallAccumulator = field(default_factory=GronwallAccumulator)
    pairs: GronwallAccumulator = field(default_factory=GronwallAccumulator)
    inv_floor: GronwallAccumulator = field(default_factory=lambda: GronwallAccumulator(0.0, 2))
    zeta_start: float = 1.0
    offset: float = 0.0

    def copy(self):
        return ShiftState(
            self.defect.copy(), self.pairs.copy(), self.inv_floor.copy(), self.zeta_start, self.offset
        )

    def trial(self, alpha_a, alpha_b, floor, beta, dt):
        """Accumulator values after one step without committing them."""
        g = math.exp(beta * dt)
        fa = self.defect.value * g + alpha_a * dt * g
        fb = self.pairs.value * g + alpha_b * dt * g
        g2 = g * g
        z2 = self.inv_floor.value * g2 + (dt * g2 / floor if floor > 0 else math.inf)
        return fa, fb, z2, self.zeta_start * g

    def commit(self, fa, fb, z2, zs):
        self.defect.value = fa
        self.pairs.value = fb
        self.inv_floor.value = z2
        self.zeta_start = zs


def delta_large(zeta_start, offset, fa, fb, z2, kfac):
    """Position uncertainty of a large shock and its components."""
    cterm = math.sqrt(z2) * kfac if math.isfinite(z2) else math.inf
    comps = {"A": fa, "B": fb, "C": cterm, "init": zeta_start * offset}
    return sum(comps.values()), comps


def boundary_delta(fa, fb, z2, kfac, zeta0, worst):
    """Position uncertainty of a boundary shock: A + B + C + zeta(t,0) worst-case."""
    cterm = math.sqrt(z2) * kfac if math.isfinite(z2) else math.inf
    comps = {"A": fa, "B": fb, "C": cterm, "D": zeta0 * worst}
    return sum(comps.values()), comps


def shock_size_fixpoint(gap_on, delta_for, centre, rough, rtol=1e-3, maxit=10):
    """Fix-point for the shock-size floor.

    gap_on(a, b) returns the infimum of the inter-piece gap over [a, b];
    delta_for(floor) returns the position uncertainty implied by the floor.
    centre = (lo, hi) is the span of the numerical curve over the step and
    rough the initial admissible half-width. Returns (floor, delta, iterates).
    """
    lo, hi = centre
    floor = gap_on(lo - rough, hi + rough)
    iterates = [floor]
    delta = delta_for(floor) if floor > 0 else math.inf
    for _ in range(maxit):
        if not math.isfinite(delta):
            break
        r = min(delta, rough)
        new = gap_on(lo - r, hi + r)
        if new < floor:
            # narrower interval cannot lower the infimum; keep monotone iterates
            new = floor
        iterates.append(new)
        grow = (new - floor) / floor if floor > 0 else math.inf
        floor = new
        delta = delta_for(floor)
        if grow < rtol:
            break
    return floor, delta, iterates


def speed_gap_m(model, rho, band=None, samples=121):
    """Minimal value of sigma(w, v) - sigma(v, u) over |.| <= band, w - u > rho, v in [u, w]."""
    law = model.law
    dd = law.ddA.coef
    if len(law.coeffs) <= 3:
        # quadratic flux: sigma(w,v) - sigma(v,u) = A''(w - u)/2 exactly
        return 0.5 * float(law.ddA(0.0)) * rho
    return speed_gap_m_grid(model, rho, band, samples)


def speed_gap_m_grid(model, rho, band=None, samples=121):
    """Brute-force grid minimisation of the speed difference (oracle form)."""
    band = model.band if band is None else band
    grid = np.linspace(-band, band, samples)
    best = math.inf
    for w in grid:
        for u in grid[grid < w - rho]:
            v = np.linspace(u, w, 25)
            d = rh_speed(model, w, v) - rh_speed(model, v, u)
            best = min(best, float(np.min(d)))
    # the admissible set is open in w - u; the infimum sits on w - u = rho
    for u in grid:
        w = u + rho
        if w > band:
            continue
        v = np.linspace(u, w, 25)
        d = rh_speed(model, w, v) - rh_speed(model, v, u)
        best = min(best, float(np.min(d)))
    return best


def rd_pair_certified(m, t, t_touch, d_left, d_right, ups_left, ups_right):
    """True once m (t - t_touch) exceeds the summed uncertainties."""
    return m * (t - t_touch) > d_left + d_right + ups_left + ups_right


def rd_pair_latency(m, d_left, d_right, ups_left, ups_right):
    return (d_left + d_right + ups_left + ups_right) / m


def upsilon(t, min_floor, kfac_fine, sbar, amax):
    """Velocity-error budget of one front-tracking shock.

    kfac_fine is sqrt(C/c e^{Ct} (fine initial entropy + fine residual)).
    """
    if t <= 0.0:
        return 0.0
    return math.sqrt(t) / math.sqrt(min_floor) * kfac_fine + t * sbar * amax


def fine_initial_entropy(hmax, delta, floor0, boundary_floors0, nnd_entropy):
    """2 sup(eta'') delta (s_0^2 + sum of boundary s^2) + NND initial entropies."""
    return 2.0 * hmax * delta * (floor0**2 + sum(f * f for f in boundary_floors0)) + nnd_entropy


def gamma(t, osc, nsteps, mhat, max_ups, kfac, amax):
    """Regional L1 budget of the front-tracking comparison."""
    spread = osc + nsteps * mhat * max_ups
    return (
        math.sqrt(spread) * math.sqrt(t) * kfac
        + 2.0 * nsteps * mhat * max_ups**2
        + spread * 2.0 * amax * mhat * t * max_ups
    )


def delta_inner(gam, slope, eps):
    """sqrt(2 Gamma / max(eps/2, discrete slope))."""
    s = eps / 2.0 if slope is None else max(eps / 2.0, slope)
    return math.sqrt(2.0) * math.sqrt(gam) / math.sqrt(s)


def worst_case(d_inner, amax, mhat, T, max_ups, gam):
    return d_inner + (amax * mhat * T + 1.0) * max_ups + (amax * T + 1.0) * math.sqrt(gam)


def l2_bound(C, init2, resid, t):
    """(squared bound, root) of C (init^2 + R) e^{Ct}."""
    sq = C * (init2 + resid) * math.exp(C * t)
    return sq, math.sqrt(sq)


def l1_bound(b_integral, regions, S, l2root, width):
    """Assembled L1 bound on the distance between the exact and glued solutions.

    regions is a list of (Gamma_d, Upsilon_d) pairs; width is the cone width.
    """
    ft = sum(g + 2.0 * S * u for g, u in regions)
    psi = b_integral + ft
    return psi + math.sqrt(width) * l2root, psi


def uncertainty_integral(intervals, values, samples):
    """Integral over the union of intervals of |v_m - v_M|.

    intervals: list of (index j, lo, hi); m is the smallest and M one past the
    largest index whose interval contains x. values(k, x) evaluates piece k.
    samples: sorted quadrature nodes (reconstruction resolution).
    """
    if not intervals:
        return 0.0
    cuts = sorted({lo for _, lo, _ in intervals} | {hi for _, _, hi in intervals})
    samples = np.asarray(samples, float)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        mid = 0.5 * (a + b)
        inside = [j for j, lo, hi in intervals if lo <= mid <= hi]
        if not inside:
            continue
        m, M = min(inside), max(inside) + 1
        xs = samples[(samples > a) & (samples < b)]
        xs = np.concatenate(([a], xs, [b]))
        f = np.abs(values(m, xs) - values(M, xs))
        total += float(np.trapezoid(f, xs))
    return total


@dataclass
class CertificateEvent:
    kind: str
    piece: int
    t_start: float
    t_fire: float
    ambiguity_start: float

    def as_dict(self):
        return {
            "kind": self.kind,
            "piece": self.piece,
            "t_start": self.t_start,
            "t_fire": self.t_fire,
            "ambiguity_start": self.ambiguity_start,
        }
