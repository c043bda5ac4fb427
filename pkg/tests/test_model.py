import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from shockcert.model import (
    burgers,
    dissipation_bound,
    dissipation_lhs,
    gronwall_constant,
    make_model,
    model_by_name,
    relative_entropy,
    relative_entropy_flux,
    relative_flux,
    rh_speed,
)

state = st.floats(-3.5, 3.5, allow_nan=False)


def test_rh_speed_values(model):
    assert rh_speed(model, 2.0, 0.0) == pytest.approx(1.0, abs=1e-15)
    assert rh_speed(model, 3.0, 3.0) == pytest.approx(3.0, abs=1e-15)
    assert rh_speed(model, 0.5, -0.5) == pytest.approx(0.0, abs=1e-15)


@given(state, state)
def test_rh_speed_is_mean_for_burgers(v, w):
    m = burgers(4.0)
    assert rh_speed(m, v, w) == pytest.approx(0.5 * (v + w), abs=1e-12)
    assert rh_speed(m, v, w) == pytest.approx(rh_speed(m, w, v), abs=1e-12)


def test_rh_speed_monotone_in_first_argument(model):
    v = np.linspace(-3.5, 3.5, 301)
    for w in (-2.0, 0.0, 1.5):
        assert np.all(np.diff(rh_speed(model, v, w)) > 0.0)


def test_relative_quantities_values(model):
    assert relative_entropy(model, 3.0, 1.0) == pytest.approx(2.0)
    assert relative_entropy(model, 1.7, 1.7) == 0.0
    assert relative_flux(model, 2.0, 0.0) == pytest.approx(2.0)
    assert relative_flux(model, -0.3, -0.3) == 0.0
    assert relative_entropy_flux(model, 1.0, 0.0) == pytest.approx(1.0 / 3.0)
    assert relative_entropy_flux(model, 0.4, 0.4) == 0.0


def test_relative_entropy_controls_quadratic_distance(model):
    rng = np.random.default_rng(1)
    a, b = rng.uniform(-4, 4, (2, 10_000))
    e = relative_entropy(model, a, b)
    d2 = (a - b) ** 2
    k = model.const
    assert np.all(e >= k.cstar * d2 - 1e-12)
    assert np.all(e <= k.cstarstar * d2 + 1e-12)
    assert np.all(relative_flux(model, a, b) >= -1e-12)
    assert np.all(relative_flux(model, a, b) <= 0.5 * k.amax * d2 + 1e-12)


def test_information_speed_bounds_entropy_flux(model):
    rng = np.random.default_rng(2)
    a, b = rng.uniform(-4, 4, (2, 10_000))
    q = np.abs(relative_entropy_flux(model, a, b))
    assert np.all(q <= model.const.info_speed * relative_entropy(model, a, b) + 1e-12)


def test_entropy_flux_compatibility(model):
    x = np.linspace(-4, 4, 101)
    ent = model.entropy
    assert np.allclose(ent.q.deriv()(x), ent.deta(x) * model.law.dA(x), atol=1e-12)


def test_burgers_constants(model):
    k = model.const
    assert k.diss_c == pytest.approx(1.0 / 24.0)
    assert k.amin == k.amax == 1.0
    assert k.cstar == k.cstarstar == 0.5
    assert k.sup_dA == pytest.approx(4.0)
    # max(1, 1/2)/(1/2) (1 + 1/2) = 3 with no negative slopes
    assert gronwall_constant(model) == pytest.approx(3.0)
    assert gronwall_constant(model, 2.0) == pytest.approx(5.0)


def test_model_errors():
    with pytest.raises(ValueError):
        make_model((0.0, 0.0, -0.5), (0.0, 0.0, 0.5), 1.0)
    with pytest.raises(ValueError):
        make_model((0.0, 0.0, 0.5), (0.0, 1.0), 1.0)
    with pytest.raises(ValueError):
        model_by_name("euler", 1.0)


def test_dissipation_bound_values(model):
    assert dissipation_bound(model, 0.0, 2.0, 0.0, 2.0, 1.0) == 0.0
    assert dissipation_lhs(model, 0.0, 2.0, 0.0, 2.0) <= 0.0
    # d+ = d- = 1 with floor 1: -(1/12)(1 + 1)
    assert dissipation_bound(model, 1.0, 3.0, 0.0, 2.0, 1.0) == pytest.approx(-1.0 / 6.0)


def test_dissipation_bound_rejects_bad_input(model):
    with pytest.raises(ValueError):
        dissipation_bound(model, 0.0, 1.0, 0.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        dissipation_bound(model, 1.0, 0.0, 0.0, 1.0, 0.5)
    with pytest.raises(ValueError):
        dissipation_bound(model, 0.0, 1.0, 0.0, 0.2, 0.5)


def _admissible_grid(n):
    g = np.linspace(-3.0, 3.0, n)
    up, um, bp, bm = (a.ravel() for a in np.meshgrid(g, g, g, g, indexing="ij"))
    ok = (um >= up) & (bm > bp)
    return up[ok], um[ok], bp[ok], bm[ok]


def test_dissipation_inequality_exhaustive_grid(model):
    up, um, bp, bm = _admissible_grid(20)
    lhs = dissipation_lhs(model, up, um, bp, bm)
    for floor_frac in (1.0, 0.5):
        floor = floor_frac * (bm - bp)
        rhs = -model.const.amin * model.const.hmin * floor * ((up - bp) ** 2 + (um - bm) ** 2) / 12.0
        assert np.all(lhs <= rhs + 1e-12)
    # the vectorised routine agrees with the hand formula on a uniform floor
    sel = (bm - bp) >= 1.0
    vals = dissipation_bound(model, up[sel], um[sel], bp[sel], bm[sel], 1.0)
    assert np.all(dissipation_lhs(model, up[sel], um[sel], bp[sel], bm[sel]) <= vals + 1e-12)


@given(state, state, state, state)
def test_dissipation_inequality_random(a, b, c, d):
    m = burgers(4.0)
    up, um = sorted((a, b))
    bp, bm = sorted((c, d))
    if bm - bp < 1e-6:
        return
    lhs = dissipation_lhs(m, up, um, bp, bm)
    assert lhs <= dissipation_bound(m, up, um, bp, bm, bm - bp) + 1e-10


def test_general_quartic_model_is_convex_and_consistent():
    m = make_model((0.0, 0.0, 0.5, 0.0, 0.05), (0.0, 0.0, 0.5), 2.0)
    k = m.const
    assert k.amin > 0 and k.amax >= k.amin
    assert k.diss_c == pytest.approx(k.amin * k.hmin / (24 * k.amax))
    x = np.linspace(-2, 2, 51)
    assert np.allclose(m.entropy.q.deriv()(x), m.entropy.deta(x) * m.law.dA(x))
