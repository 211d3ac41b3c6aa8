import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from biharm import asymptotics, shooting, transforms
from biharm import radial_ode as ro
from biharm.errors import NonPositiveL, NotGlobal, SOutOfRange, TooFewSamples

R = np.geomspace(1.0, 1e4, 600)


def _synthetic(u, du, q=2.0):
    return ro.SolutionTrace.from_arrays(R, u, du, np.zeros_like(R), np.zeros_like(R), q=q)


@pytest.fixture(scope="module")
def global_q2():
    return ro.integrate(4.0, 2, ro.IntegratorControls(r_target=1e3))


def test_linear_profile_maps_to_zero():
    kt = transforms.kelvin(_synthetic(2.5 * R, np.full_like(R, 2.5)), 2.5)
    np.testing.assert_allclose(kt.vbar, 0, atol=1e-15)
    assert np.all(np.diff(kt.s) < 0)


def test_sqrt_correction_maps_to_sqrt_s():
    kt = transforms.kelvin(_synthetic(2 * R + np.sqrt(R), 2 + 0.5 / np.sqrt(R)), 2.0)
    np.testing.assert_allclose(kt.vbar, np.sqrt(kt.s), rtol=1e-12)


def test_kelvin_preconditions(global_q2):
    with pytest.raises(NonPositiveL):
        transforms.kelvin(global_q2, 0.0)
    with pytest.raises(NonPositiveL):
        transforms.extract_xi(global_q2, -1.0)
    extinct = ro.integrate(0.0, 2)
    with pytest.raises(NotGlobal):
        transforms.kelvin(extinct, 1.0)
    with pytest.raises(NotGlobal):
        transforms.extract_xi(extinct, 1.0)


def test_kelvin_keeps_samples_beyond_unit_radius(global_q2):
    kt = transforms.kelvin(global_q2, 1.0)
    assert len(kt) == np.count_nonzero(global_q2.r >= 1.0)
    assert np.all(kt.s <= 1)


def test_roundtrip_and_xi_agreement(global_q2):
    L = float(global_q2.u[-1] / global_q2.r[-1])
    kt = transforms.kelvin(global_q2, L)
    back = transforms.inverse_kelvin(kt)
    keep = global_q2.r >= 1.0
    np.testing.assert_allclose(back.r, global_q2.r[keep], rtol=1e-15)
    np.testing.assert_allclose(back.u, global_q2.u[keep], rtol=1e-13)
    np.testing.assert_allclose(back.du, global_q2.du[keep], rtol=1e-9)
    xi = transforms.extract_xi(global_q2, L)
    assert np.array_equal(xi.xi[keep], kt.vbar)
    assert np.array_equal(1.0 / xi.r[keep], kt.s)


def test_residual_of_global_q2_trace(global_q2):
    L = float(global_q2.u[-1] / global_q2.r[-1])
    prof = transforms.residual_avg_ode(transforms.kelvin(global_q2, L))
    assert prof.max_relative < 1e-2
    assert prof.x.max() <= 0.1


def test_residual_does_not_depend_on_L(global_q2):
    a = transforms.residual_avg_ode(transforms.kelvin(global_q2, 0.5)).max_relative
    b = transforms.residual_avg_ode(transforms.kelvin(global_q2, 3.0)).max_relative
    assert a < 1e-2 and b < 1e-2


def test_residual_detects_wrong_exponent():
    # near threshold the source term is visible; on u ~ r^2 traces it sits under rounding
    trace = ro.integrate(2.0054, 2, ro.IntegratorControls(r_target=1e3))
    kt = transforms.kelvin(trace, 1.0)
    assert transforms.residual_avg_ode(kt).max_relative < 1e-3
    wrong = transforms.KelvinTrace(kt.s, kt.vbar, kt.L, 4.0, kt.dvbar)
    assert transforms.residual_avg_ode(wrong).max_relative > 0.1


S = np.geomspace(1e-4, 1.0, 400)


@pytest.mark.parametrize(
    "f,df",
    [
        (lambda s: np.ones_like(s), lambda s: np.zeros_like(s)),
        (lambda s: s, lambda s: np.ones_like(s)),
        (lambda s: s**2, lambda s: 2 * s),
    ],
    ids=["one", "s", "s2"],
)
def test_polynomial_kernel_of_transformed_operator(f, df):
    # cubic Hermite reproduces these exactly, so only rounding is left
    kt = transforms.KelvinTrace(S[::-1], f(S[::-1]), 1.0, 2.0, df(S[::-1]))
    prof = transforms.residual_avg_ode(kt, window=(1e-3, 0.5), include_source=False)
    assert np.max(np.abs(prof.residual * prof.x**4)) < 1e-8


def test_inverse_s_is_in_the_kernel():
    kt = transforms.KelvinTrace(S[::-1], 1 / S[::-1], 1.0, 2.0, -1 / S[::-1] ** 2)
    prof = transforms.residual_avg_ode(kt, window=(1e-3, 0.5), include_source=False)
    assert prof.max_relative < 1e-3


def test_cubic_is_not_in_the_kernel():
    kt = transforms.KelvinTrace(S[::-1], S[::-1] ** 3, 1.0, 2.0, 3 * S[::-1] ** 2)
    prof = transforms.residual_avg_ode(kt, window=(1e-2, 0.5), include_source=False)
    np.testing.assert_allclose(prof.residual, 24 / prof.x, rtol=1e-6)


def test_too_few_samples():
    kt = transforms.KelvinTrace(S[:5], S[:5], 1.0, 2.0)
    with pytest.raises(TooFewSamples):
        transforms.residual_avg_ode(kt)


def test_emden_examples():
    kt = transforms.KelvinTrace(np.array([1.0, math.exp(-3.0)]), np.array([0.1, 0.2]), 1.0, 2.0)
    et = transforms.emden(kt)
    assert et.t[0] == 0.0 and et.t[1] == pytest.approx(3.0, abs=1e-15)
    assert et.zbar.tolist() == [0.1, 0.2]
    for bad in ([1.5, 0.5], [0.5, 0.0], [0.5, -1.0]):
        with pytest.raises(SOutOfRange):
            transforms.emden(transforms.KelvinTrace(np.array(bad), np.zeros(2), 1.0, 2.0))


@given(a=st.floats(0.1, 5.0))
def test_emden_turns_powers_into_exponentials(a):
    kt = transforms.KelvinTrace(S[::-1], S[::-1] ** a, 1.0, 2.0)
    et = transforms.emden(kt)
    assert np.all(np.diff(et.t) > 0)
    slope = np.polyfit(et.t, np.log(np.abs(et.zbar)), 1)[0]
    assert abs(slope + a) < 1e-6


@settings(max_examples=30, deadline=None)
@given(L=st.floats(0.1, 10.0), c=st.floats(-1.0, 1.0), p=st.floats(-1.0, 0.9))
def test_roundtrip_and_agreement_on_synthetic_profiles(L, c, p):
    u = L * R + c * R**p + 5.0
    du = L + c * p * R ** (p - 1)
    t = _synthetic(u, du)
    kt = transforms.kelvin(t, L)
    back = transforms.inverse_kelvin(kt)
    np.testing.assert_allclose(back.u, u, rtol=1e-13, atol=1e-12)
    assert np.array_equal(transforms.extract_xi(t, L).xi, kt.vbar)


def test_csv_exports(tmp_path, global_q2):
    kt = transforms.kelvin(global_q2, 1.0)
    transforms.write_kelvin_csv(kt, tmp_path / "k.csv", {"q": 2})
    transforms.write_emden_csv(transforms.emden(kt), tmp_path / "e.csv", {"q": 2})
    k_lines = (tmp_path / "k.csv").read_text().splitlines()
    e_lines = (tmp_path / "e.csv").read_text().splitlines()
    assert k_lines[0] == "# q: 2" and k_lines[1] == "s,vbar" and len(k_lines) == len(kt) + 2
    assert e_lines[1] == "t,zbar"
    s, v = map(float, k_lines[2].split(","))
    assert s == kt.s[0] and v == kt.vbar[0]


def _minimal_fit(cert):
    trace = cert.hi.trace
    mw = shooting.minimal_window(cert, cert.controls)
    win = asymptotics.tail_window(mw[1], mw[0])
    return trace, win, asymptotics.estimate_L(trace, win).L


@pytest.mark.slow
def test_xi_decay_for_q35(cert_at):
    trace, win, L = _minimal_fit(cert_at(3.5))
    xi = transforms.extract_xi(trace, L)
    keep = (xi.r >= win[0]) & (xi.r <= win[1])
    assert transforms.decay_exponent(xi.r[keep], xi.xi[keep]) == pytest.approx(-0.5, abs=0.1)


@pytest.mark.slow
def test_vbar_linear_in_s_and_residual_for_q5(cert_at):
    trace, win, L = _minimal_fit(cert_at(5))
    kt = transforms.kelvin(trace, L)
    keep = (kt.s >= 1 / win[1]) & (kt.s <= 1 / win[0])
    assert transforms.decay_exponent(kt.s[keep], kt.vbar[keep]) == pytest.approx(1.0, abs=0.15)
    ratio = np.abs(kt.vbar[keep]) / kt.s[keep]
    assert ratio.max() / ratio.min() < 2
    prof = transforms.residual_avg_ode(kt, window=(1 / win[1], 1 / win[0]))
    assert prof.max_relative < 1e-2
