import os
import subprocess
import sys

import numpy as np
import pytest

from shockcert import _kernels as K

pytestmark = pytest.mark.skipif(not K.HAS_NUMBA, reason="numba not installed")

COEF = np.array([0.0, 0.0, 0.5])
DCOEF = np.array([0.0, 1.0])


def _levels(rng, n=64):
    uo = np.sort(rng.uniform(-1, 2, n))
    un = uo + 0.01 * rng.standard_normal(n)
    return uo, un


def test_fv_step_kernels_agree():
    rng = np.random.default_rng(0)
    u = rng.uniform(-2, 2, 200)
    a = K.fv_step_np(u, COEF, 0.0, 0.2)
    b = K.fv_step_nb(u, COEF, 0.0, 0.2)
    assert np.allclose(a, b, rtol=0, atol=1e-14)


def test_residual_kernels_agree():
    rng = np.random.default_rng(1)
    uo, un = _levels(rng)
    h, dt = 0.01, 0.002
    assert K.r2_grid_sum_np(uo, un, DCOEF, h, dt) == pytest.approx(
        K.r2_grid_sum_nb(uo, un, DCOEF, h, dt, K.GAUSS), rel=1e-12
    )
    ba = np.zeros((100, 4))
    bb = np.zeros((100, 4))
    K.r2_grid_max_np(ba, uo, un, 10, 5, 90, DCOEF, h, dt)
    K.r2_grid_max_nb(bb, uo, un, 10, 5, 90, DCOEF, h, dt, K.GAUSS)
    assert np.allclose(ba, bb, rtol=1e-12, atol=0)


def test_line_residual_kernels_agree():
    rng = np.random.default_rng(2)
    n = 400
    h, dt = 0.01, 0.002
    ro = 2.0 * (-2.0 + (np.arange(n) + 0.5) * h)
    rn = ro + 0.001 * rng.standard_normal(n).cumsum() * 0.01
    rn = np.sort(rn)
    args = (ro, rn, -2.0, -1.0, 20, 180, 0.5, 0.1, 0.4, -0.5, 1.5, DCOEF, h, dt)
    ba = np.zeros((200, 4))
    bb = np.zeros((200, 4))
    K.r2_line_max_np(ba, *args)
    K.r2_line_max_nb(bb, *args, K.GAUSS)
    assert np.allclose(ba, bb, rtol=1e-10, atol=1e-14)
    assert ba.max() > 0.0


def test_min_gap_kernels_agree():
    rng = np.random.default_rng(3)
    ua = rng.uniform(1, 2, 50)
    ub = rng.uniform(0, 1, 70)
    assert K.min_gap_np(ua, 5, ub, 0, 0, 80) == K.min_gap_nb(ua, 5, ub, 0, 0, 80)


def test_environment_switch_selects_numpy():
    code = "from shockcert import _kernels as K; print(K.USE_NUMBA)"
    env = dict(os.environ, SHOCKCERT_NO_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "False"


def test_pipeline_identical_under_both_backends(monkeypatch):
    from shockcert.pipeline import RunSettings, Simulation
    from conftest import EXP1

    a = Simulation(EXP1, RunSettings(100, 0.1)).run().final
    monkeypatch.setattr(K, "USE_NUMBA", False)
    b = Simulation(EXP1, RunSettings(100, 0.1)).run().final
    assert a["l1"] == pytest.approx(b["l1"], rel=1e-10)
    assert a["R"] == pytest.approx(b["R"], rel=1e-10)
    assert np.allclose(a["deltas"], b["deltas"], rtol=1e-10)
