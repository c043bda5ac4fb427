"""Hot loops: finite-volume update and space-time residual quadrature.

Each kernel exists twice: a numba version written as explicit loops and a
vectorised numpy version. Setting SHOCKCERT_NO_NUMBA=1 (or running without
numba installed) selects the numpy versions.
"""
import os

import numpy as np

try:
    from numba import njit

    HAS_NUMBA = True
except ImportError:  # pragma: no cover
    HAS_NUMBA = False

USE_NUMBA = HAS_NUMBA and os.environ.get("SHOCKCERT_NO_NUMBA", "0") not in ("1", "true", "yes")

# two-point Gauss rule on [0, 1]
GAUSS = np.array([0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)])


def _horner(coef, x):
    out = np.zeros_like(x) + coef[-1]
    for c in coef[-2::-1]:
        out = out * x + c
    return out


# ---------------------------------------------------------------- numpy


def fv_step_np(u, coef, sonic, lam):
    """One forward-Euler Engquist-Osher step with constant ghost cells."""
    up = np.concatenate((u[:1], u, u[-1:]))
    left = up[:-1]
    right = up[1:]
    flux = (
        _horner(coef, np.maximum(left, sonic))
        + _horner(coef, np.minimum(right, sonic))
        - _horner(coef, np.array(sonic))
    )
    return u - lam * (flux[1:] - flux[:-1])


def _corner_values(uo, un, lo, g0, g1):
    n = len(uo)
    g = np.arange(g0, g1)
    ia = np.clip(g - lo, 0, n - 1)
    ib = np.clip(g + 1 - lo, 0, n - 1)
    return uo[ia], uo[ib], un[ia], un[ib]


def _r2_bilinear(a, b, c, d, xi, tau, dcoef, h, dt):
    v = (1 - tau) * ((1 - xi) * a + xi * b) + tau * ((1 - xi) * c + xi * d)
    vt = ((1 - xi) * (c - a) + xi * (d - b)) / dt
    vx = ((1 - tau) * (b - a) + tau * (d - c)) / h
    r = vt + _horner(dcoef, v) * vx
    return r * r


def r2_grid_max_np(buf, uo, un, lo, g0, g1, dcoef, h, dt):
    """buf[g, q] = max(buf[g, q], R^2) for a grid piece on intervals g0..g1-1."""
    if g1 <= g0:
        return
    a, b, c, d = _corner_values(uo, un, lo, g0, g1)
    q = 0
    for xi in GAUSS:
        for tau in GAUSS:
            r2 = _r2_bilinear(a, b, c, d, xi, tau, dcoef, h, dt)
            np.maximum(buf[g0:g1, q], r2, out=buf[g0:g1, q])
            q += 1


def r2_grid_sum_np(uo, un, dcoef, h, dt):
    """Integral of R^2 over the piece's own midpoint intervals for one step."""
    a, b, c, d = uo[:-1], uo[1:], un[:-1], un[1:]
    tot = 0.0
    for xi in GAUSS:
        for tau in GAUSS:
            tot += _r2_bilinear(a, b, c, d, xi, tau, dcoef, h, dt).sum()
    return 0.25 * h * dt * tot


def _line_eval(ro, rn, rx0, h, y, tau):
    """Bilinear reconstruction of the reference line solution at (y, tau)."""
    n = len(ro)
    s = (y - rx0) / h - 0.5
    j = np.clip(np.floor(s).astype(np.int64), 0, n - 2)
    xi = np.clip(s - j, 0.0, 1.0)
    a, b, c, d = ro[j], ro[j + 1], rn[j], rn[j + 1]
    return a, b, c, d, xi


def r2_line_max_np(buf, ro, rn, rx0, gx0, g0, g1, plateau, s_lam, s_p, low, high, dcoef, h, dt):
    """Residual of a staircase surrogate built from shifted copies of the line solution."""
    if g1 <= g0:
        return
    mids = gx0 + (np.arange(g0, g1) + 0.5) * h
    q = 0
    for xi in GAUSS:
        x = mids + xi * h
        for tau in GAUSS:
            la = _line_eval(ro, rn, rx0, h, x - s_lam, tau)
            pa = _line_eval(ro, rn, rx0, h, x - s_p, tau)
            lv = (1 - tau) * ((1 - la[4]) * la[0] + la[4] * la[1]) + tau * (
                (1 - la[4]) * la[2] + la[4] * la[3]
            )
            pv = (1 - tau) * ((1 - pa[4]) * pa[0] + pa[4] * pa[1]) + tau * (
                (1 - pa[4]) * pa[2] + pa[4] * pa[3]
            )
            inner = np.minimum(plateau, lv)
            val = np.minimum(high, np.maximum(np.maximum(pv, inner), low))
            r2l = _r2_bilinear(la[0], la[1], la[2], la[3], la[4], tau, dcoef, h, dt)
            r2p = _r2_bilinear(pa[0], pa[1], pa[2], pa[3], pa[4], tau, dcoef, h, dt)
            r2 = np.where(val == lv, r2l, np.where(val == pv, r2p, 0.0))
            np.maximum(buf[g0:g1, q], r2, out=buf[g0:g1, q])
            q += 1


def min_gap_np(ua, loa, ub, lob, g0, g1):
    """min over global midpoints g0..g1-1 of (piece a - piece b), constant tails."""
    g = np.arange(g0, g1)
    va = ua[np.clip(g - loa, 0, len(ua) - 1)]
    vb = ub[np.clip(g - lob, 0, len(ub) - 1)]
    return float(np.min(va - vb))


# ---------------------------------------------------------------- numba

if HAS_NUMBA:

    @njit(cache=True)
    def _poly(coef, x):
        out = coef[coef.shape[0] - 1]
        for k in range(coef.shape[0] - 2, -1, -1):
            out = out * x + coef[k]
        return out

    @njit(cache=True)
    def fv_step_nb(u, coef, sonic, lam):
        n = u.shape[0]
        out = np.empty(n)
        a_s = _poly(coef, sonic)
        prev = _poly(coef, u[0])  # boundary face flux A(u_0)
        for j in range(n):
            l = u[j]
            r = u[j + 1] if j + 1 < n else u[j]
            if j + 1 < n:
                fl = _poly(coef, max(l, sonic)) + _poly(coef, min(r, sonic)) - a_s
            else:
                fl = _poly(coef, l)
            out[j] = u[j] - lam * (fl - prev)
            prev = fl
        return out

    @njit(cache=True)
    def _r2_point(a, b, c, d, xi, tau, dcoef, h, dt):
        v = (1 - tau) * ((1 - xi) * a + xi * b) + tau * ((1 - xi) * c + xi * d)
        vt = ((1 - xi) * (c - a) + xi * (d - b)) / dt
        vx = ((1 - tau) * (b - a) + tau * (d - c)) / h
        r = vt + _poly(dcoef, v) * vx
        return r * r

    @njit(cache=True)
    def r2_grid_max_nb(buf, uo, un, lo, g0, g1, dcoef, h, dt, gauss):
        n = uo.shape[0]
        for g in range(g0, g1):
            ia = min(max(g - lo, 0), n - 1)
            ib = min(max(g + 1 - lo, 0), n - 1)
            a, b, c, d = uo[ia], uo[ib], un[ia], un[ib]
            q = 0
            for p in range(2):
                for s in range(2):
                    r2 = _r2_point(a, b, c, d, gauss[p], gauss[s], dcoef, h, dt)
                    if r2 > buf[g, q]:
                        buf[g, q] = r2
                    q += 1

    @njit(cache=True)
    def r2_grid_sum_nb(uo, un, dcoef, h, dt, gauss):
        tot = 0.0
        for j in range(uo.shape[0] - 1):
            for p in range(2):
                for s in range(2):
                    tot += _r2_point(uo[j], uo[j + 1], un[j], un[j + 1], gauss[p], gauss[s], dcoef, h, dt)
        return 0.25 * h * dt * tot

    @njit(cache=True)
    def _locate(n, rx0, h, y):
        s = (y - rx0) / h - 0.5
        j = int(np.floor(s))
        if j < 0:
            j = 0
        if j > n - 2:
            j = n - 2
        xi = s - j
        if xi < 0.0:
            xi = 0.0
        if xi > 1.0:
            xi = 1.0
        return j, xi

    @njit(cache=True)
    def r2_line_max_nb(buf, ro, rn, rx0, gx0, g0, g1, plateau, s_lam, s_p, low, high, dcoef, h, dt, gauss):
        n = ro.shape[0]
        for g in range(g0, g1):
            mid = gx0 + (g + 0.5) * h
            q = 0
            for p in range(2):
                x = mid + gauss[p] * h
                jl, xl = _locate(n, rx0, h, x - s_lam)
                jp, xp = _locate(n, rx0, h, x - s_p)
                for s in range(2):
                    tau = gauss[s]
                    lv = (1 - tau) * ((1 - xl) * ro[jl] + xl * ro[jl + 1]) + tau * (
                        (1 - xl) * rn[jl] + xl * rn[jl + 1]
                    )
                    pv = (1 - tau) * ((1 - xp) * ro[jp] + xp * ro[jp + 1]) + tau * (
                        (1 - xp) * rn[jp] + xp * rn[jp + 1]
                    )
                    inner = min(plateau, lv)
                    val = min(high, max(max(pv, inner), low))
                    r2 = 0.0
                    if val == lv:
                        r2 = _r2_point(ro[jl], ro[jl + 1], rn[jl], rn[jl + 1], xl, tau, dcoef, h, dt)
                    elif val == pv:
                        r2 = _r2_point(ro[jp], ro[jp + 1], rn[jp], rn[jp + 1], xp, tau, dcoef, h, dt)
                    if r2 > buf[g, q]:
                        buf[g, q] = r2
                    q += 1

    @njit(cache=True)
    def min_gap_nb(ua, loa, ub, lob, g0, g1):
        na = ua.shape[0]
        nb = ub.shape[0]
        best = np.inf
        for g in range(g0, g1):
            va = ua[min(max(g - loa, 0), na - 1)]
            vb = ub[min(max(g - lob, 0), nb - 1)]
            if va - vb < best:
                best = va - vb
        return best


def fv_step(u, coef, sonic, lam):
    if USE_NUMBA:
        return fv_step_nb(u, coef, float(sonic), float(lam))
    return fv_step_np(u, coef, sonic, lam)


def r2_grid_max(buf, uo, un, lo, g0, g1, dcoef, h, dt):
    if USE_NUMBA:
        r2_grid_max_nb(buf, uo, un, int(lo), int(g0), int(g1), dcoef, h, dt, GAUSS)
    else:
        r2_grid_max_np(buf, uo, un, lo, g0, g1, dcoef, h, dt)


def r2_grid_sum(uo, un, dcoef, h, dt):
    if USE_NUMBA:
        return r2_grid_sum_nb(uo, un, dcoef, h, dt, GAUSS)
    return r2_grid_sum_np(uo, un, dcoef, h, dt)


def r2_line_max(buf, ro, rn, rx0, gx0, g0, g1, plateau, s_lam, s_p, low, high, dcoef, h, dt):
    if USE_NUMBA:
        r2_line_max_nb(
            buf, ro, rn, rx0, gx0, int(g0), int(g1), plateau, s_lam, s_p, low, high, dcoef, h, dt, GAUSS
        )
    else:
        r2_line_max_np(buf, ro, rn, rx0, gx0, g0, g1, plateau, s_lam, s_p, low, high, dcoef, h, dt)


def min_gap(ua, loa, ub, lob, g0, g1):
    if g1 <= g0:
        return np.inf
    if USE_NUMBA:
        return min_gap_nb(ua, int(loa), ub, int(lob), int(g0), int(g1))
    return min_gap_np(ua, loa, ub, lob, g0, g1)
