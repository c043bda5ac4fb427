"""Flux and entropy algebra for a convex scalar conservation law.

The flux A and entropy eta are polynomials given by ascending coefficients.
The entropy flux q is the antiderivative of eta' A' with q(0) = 0, so the
compatibility q' = eta' A' holds exactly.
"""
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial import Polynomial

_SAMPLES = 401


@dataclass(frozen=True)
class ScalarLaw:
    """Polynomial flux A on the value band [-band, band]."""

    coeffs: tuple
    band: float
    A: Polynomial = field(init=False, repr=False)
    dA: Polynomial = field(init=False, repr=False)
    ddA: Polynomial = field(init=False, repr=False)

    def __post_init__(self):
        poly = Polynomial(np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "A", poly)
        object.__setattr__(self, "dA", poly.deriv())
        object.__setattr__(self, "ddA", poly.deriv(2))
        grid = np.linspace(-self.band, self.band, _SAMPLES)
        if np.any(self.ddA(grid) <= 0.0):
            raise ValueError("flux is not strictly convex on the band")

    @property
    def sonic(self):
        """Minimiser of A on the band (the point where A' changes sign)."""
        if self.dA(-self.band) >= 0.0:
            return -self.band
        if self.dA(self.band) <= 0.0:
            return self.band
        roots = self.dA.roots()
        roots = roots[np.abs(roots.imag) < 1e-12].real
        roots = roots[(roots >= -self.band) & (roots <= self.band)]
        return float(roots[0])


@dataclass(frozen=True)
class EntropyPair:
    """Polynomial entropy eta with entropy flux q' = eta' A'."""

    coeffs: tuple
    law: ScalarLaw
    eta: Polynomial = field(init=False, repr=False)
    deta: Polynomial = field(init=False, repr=False)
    ddeta: Polynomial = field(init=False, repr=False)
    q: Polynomial = field(init=False, repr=False)

    def __post_init__(self):
        eta = Polynomial(np.asarray(self.coeffs, dtype=float))
        object.__setattr__(self, "eta", eta)
        object.__setattr__(self, "deta", eta.deriv())
        object.__setattr__(self, "ddeta", eta.deriv(2))
        qprime = eta.deriv() * self.law.dA
        q = qprime.integ()
        object.__setattr__(self, "q", q - q(0.0))
        grid = np.linspace(-self.law.band, self.law.band, _SAMPLES)
        if np.any(self.ddeta(grid) <= 0.0):
            raise ValueError("entropy is not strictly convex on the band")


@dataclass(frozen=True)
class ModelConstants:
    sup_dA: float
    info_speed: float
    amax: float
    amin: float
    hmin: float
    hmax: float
    cstar: float
    cstarstar: float
    diss_c: float


@dataclass(frozen=True)
class Model:
    law: ScalarLaw
    entropy: EntropyPair
    const: ModelConstants

    @property
    def band(self):
        return self.law.band


def _constants(law, ent):
    grid = np.linspace(-law.band, law.band, _SAMPLES)
    dd_a = law.ddA(grid)
    dd_eta = ent.ddeta(grid)
    amax, amin = float(dd_a.max()), float(dd_a.min())
    hmax, hmin = float(dd_eta.max()), float(dd_eta.min())
    # eta(a|b) = eta''(xi)/2 (a-b)^2 for some xi between a and b
    cstar, cstarstar = 0.5 * hmin, 0.5 * hmax
    a, b = np.meshgrid(grid[::2], grid[::2], indexing="ij")
    off = a != b
    a, b = a[off], b[off]
    ratio = np.abs(_rel_entropy_flux(law, ent, a, b)) / _rel_entropy(ent, a, b)
    info = 1.05 * float(ratio.max())
    sup_da = float(np.abs(law.dA(grid)).max())
    return ModelConstants(
        sup_dA=sup_da,
        info_speed=info,
        amax=amax,
        amin=amin,
        hmin=hmin,
        hmax=hmax,
        cstar=cstar,
        cstarstar=cstarstar,
        diss_c=amin * hmin / (24.0 * amax),
    )


def make_model(flux_coeffs, entropy_coeffs, band):
    law = ScalarLaw(tuple(flux_coeffs), float(band))
    ent = EntropyPair(tuple(entropy_coeffs), law)
    return Model(law, ent, _constants(law, ent))


def burgers(band=4.0):
    """A(u) = u^2/2 with eta(u) = u^2/2 and q(u) = u^3/3."""
    return make_model((0.0, 0.0, 0.5), (0.0, 0.0, 0.5), band)


def model_by_name(name, band):
    if name == "burgers":
        return burgers(band)
    raise ValueError(f"unknown model {name!r}")


def rh_speed(model, v, w):
    """Rankine-Hugoniot speed of the jump (v, w); A'(w) when v == w."""
    law = model.law
    v = np.asarray(v, dtype=float)
    w = np.asarray(w, dtype=float)
    diff = v - w
    same = np.abs(diff) <= 1e-14 * (1.0 + np.abs(w))
    safe = np.where(same, 1.0, diff)
    out = np.where(same, law.dA(0.5 * (v + w)), (law.A(v) - law.A(w)) / safe)
    return float(out) if out.ndim == 0 else out


def _rel_entropy(ent, a, b):
    return ent.eta(a) - ent.eta(b) - ent.deta(b) * (a - b)


def _rel_entropy_flux(law, ent, a, b):
    return ent.q(a) - ent.q(b) - ent.deta(b) * (law.A(a) - law.A(b))


def relative_entropy(model, a, b):
    """eta(a|b) = eta(a) - eta(b) - eta'(b)(a - b)."""
    return _rel_entropy(model.entropy, np.asarray(a, float), np.asarray(b, float))


def relative_flux(model, a, b):
    """A(a|b) = A(a) - A(b) - A'(b)(a - b)."""
    law = model.law
    a = np.asarray(a, float)
    b = np.asarray(b, float)
    return law.A(a) - law.A(b) - law.dA(b) * (a - b)


def relative_entropy_flux(model, a, b):
    """q(a;b) = q(a) - q(b) - eta'(b)(A(a) - A(b))."""
    return _rel_entropy_flux(
        model.law, model.entropy, np.asarray(a, float), np.asarray(b, float)
    )


def dissipation_bound(model, u_plus, u_minus, ub_plus, ub_minus, floor):
    """Upper bound on the entropy dissipation of a shifted shock.

    Returns -(1/12) inf A'' inf eta'' floor ((u+ - ub+)^2 + (u- - ub-)^2).
    """
    if floor <= 0.0:
        raise ValueError("shock size floor must be positive")
    if np.any(np.asarray(u_minus) < np.asarray(u_plus)):
        raise ValueError("u_minus must not be below u_plus")
    if np.any(np.asarray(ub_minus) - np.asarray(ub_plus) < floor * (1 - 1e-12)):
        raise ValueError("reference jump smaller than the floor")
    k = model.const
    d2 = (np.asarray(u_plus) - ub_plus) ** 2 + (np.asarray(u_minus) - ub_minus) ** 2
    return -k.amin * k.hmin * floor * d2 / 12.0


def dissipation_lhs(model, u_plus, u_minus, ub_plus, ub_minus):
    """Left side of the dissipation inequality, evaluated directly."""
    sig = rh_speed(model, u_plus, u_minus)
    return (
        relative_entropy_flux(model, u_plus, ub_plus)
        - relative_entropy_flux(model, u_minus, ub_minus)
        - sig
        * (
            relative_entropy(model, u_plus, ub_plus)
            - relative_entropy(model, u_minus, ub_minus)
        )
    )


def gronwall_constant(model, neg_slope=0.0):
    """C = max(1, c**)/c* (1 + sup(eta'')^2/2 + amax |[d_x eta'(psi)]_-|/2)."""
    k = model.const
    return (
        max(1.0, k.cstarstar)
        / k.cstar
        * (1.0 + 0.5 * k.hmax**2 + 0.5 * k.amax * neg_slope)
    )
