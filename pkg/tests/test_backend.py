import os
import subprocess
import sys

import numpy as np
import pytest

from biharm import _backend
from biharm.radial_ode import IntegratorControls, series_start

CASES = [(2.0, 0.0, 1e3), (2.0, 4.0, 1e3), (5.0, 0.95, 1e6), (3.0, -1.0, 1e2)]


def _call(kernel, q, beta, horizon):
    c = IntegratorControls(r_target=horizon)
    s = series_start(beta, q, c.start_radius)
    return kernel((s.u, s.du, s.v, s.dv), s.r, q, horizon, c.rel_tol, c.abs_tol, c.u_floor, c.max_steps, c.max_step_ratio)


@pytest.mark.parametrize("q,beta,horizon", CASES)
def test_backends_bitwise_identical(q, beta, horizon):
    ks = _backend.kernels()
    if "cython" not in ks:
        pytest.skip("compiled kernel not built")
    a = _call(ks["python"], q, beta, horizon)
    b = _call(ks["cython"], q, beta, horizon)
    np.testing.assert_array_equal(a[0], b[0])
    np.testing.assert_array_equal(a[1], b[1])
    assert a[2:] == b[2:]


def test_budget_status_from_both_backends():
    for kernel in _backend.kernels().values():
        c = IntegratorControls()
        s = series_start(4.0, 2, c.start_radius)
        out = kernel((s.u, s.du, s.v, s.dv), s.r, 2.0, 1e3, c.rel_tol, c.abs_tol, c.u_floor, 5, c.max_step_ratio)
        assert out[2] == 3


def test_env_var_forces_python_fallback():
    env = dict(os.environ, BIHARM_PURE_PYTHON="1")
    out = subprocess.run(
        [sys.executable, "-c", "from biharm import _backend; print(_backend.BACKEND)"],
        env=env, capture_output=True, text=True, check=True,
    )
    assert out.stdout.strip() == "python"
