import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fluidframe.eos import Barotropic, EntropicPolytrope, InadmissibleState, LinearEOS, make_eos

r_st = st.floats(0.05, 20.0)
s_st = st.floats(-3.0, 3.0)


def test_polytrope_reference_values():
    eos = EntropicPolytrope(2.0)
    assert eos.pressure(1.0, 0.0) == pytest.approx(1.0, abs=1e-14)
    assert eos.pressure(2.0, 0.0) == pytest.approx(4.0, abs=1e-14)
    assert eos.thermo(1.0, 0.0).K == pytest.approx(1.0, abs=1e-14)
    assert eos.thermo(1.0, np.log(2.0)).K == pytest.approx(2.0, abs=1e-14)
    assert eos.sound_speed_sq(1.0, 0.0) == pytest.approx(2.0 / 3.0, abs=1e-14)


def test_polytrope_hand_derived_second_derivative():
    # p = e^s r^2, rho = r + e^s r^2, so d^2p/drho^2 at fixed s is 2 e^s / (1 + 2 e^s r)^3
    t = EntropicPolytrope(2.0).thermo(1.5, 0.3)
    assert t.p_rhorho == pytest.approx(0.020967830249531173, rel=1e-13)
    assert t.nu2 == pytest.approx(0.8019635873815026, rel=1e-13)


@pytest.mark.parametrize("gamma", [4.0 / 3.0, 5.0 / 3.0, 2.0, 2.5])
@given(r=r_st, s=s_st)
def test_polytrope_matches_closed_form(gamma, r, s):
    eos = EntropicPolytrope(gamma)
    cf = eos.closed_form(r, s)
    t = eos.thermo(r, s)
    for k in ("rho", "p", "K", "nu2"):
        assert getattr(t, k) == pytest.approx(cf[k], rel=1e-12)


@pytest.mark.parametrize("eos", [EntropicPolytrope(2.0), EntropicPolytrope(1.4), LinearEOS(0.3)])
@given(r=r_st, s=s_st)
def test_first_law(eos, r, s):
    t = eos.thermo(r, s)
    assert t.rho_r == pytest.approx((t.p + t.rho) / r, rel=1e-12)
    assert t.rho_s == pytest.approx(r * t.K, rel=1e-12)
    assert t.enthalpy == pytest.approx((t.p + t.rho) / r, rel=1e-12)


def _cd(f, x, h):
    return (f(x + h) - f(x - h)) / (2 * h)


@pytest.mark.parametrize("eos", [EntropicPolytrope(2.0), EntropicPolytrope(5.0 / 3.0), LinearEOS(0.25)])
@given(r=st.floats(0.2, 5.0), s=st.floats(-1.0, 1.0))
def test_partials_against_central_differences(eos, r, s):
    t = eos.thermo(r, s)
    h = 1e-5
    checks = {
        "rho_r": _cd(lambda x: eos.rho(x, s), r, h * r),
        "rho_s": _cd(lambda x: eos.rho(r, x), s, h),
        "p_r": _cd(lambda x: eos.pressure(x, s), r, h * r),
        "p_s": _cd(lambda x: eos.pressure(r, x), s, h),
        "nu2_r": _cd(lambda x: eos.sound_speed_sq(x, s), r, h * r),
        "nu2_s": _cd(lambda x: eos.sound_speed_sq(r, x), s, h),
    }
    for name, fd in checks.items():
        assert getattr(t, name) == pytest.approx(fd, rel=1e-6, abs=1e-9), name
    # nu^2 = (dp/drho)_s through r
    assert t.nu2 == pytest.approx(t.p_r / t.rho_r, rel=1e-12)


def test_linear_eos_has_no_curvature():
    eos = LinearEOS(0.3)
    r = np.linspace(0.1, 4, 7)
    t = eos.thermo(r, 0.2)
    np.testing.assert_allclose(t.p, 0.3 * t.rho, rtol=1e-14)
    np.testing.assert_allclose(t.nu2, 0.3, rtol=1e-14)
    np.testing.assert_allclose(t.p_rhorho, 0.0, atol=1e-14)


def test_barotropic_has_zero_temperature_and_is_flagged():
    eos = Barotropic(EntropicPolytrope(2.0))
    assert eos.temperature(1.0, 5.0) == 0.0
    assert eos.pressure(1.0, 5.0) == pytest.approx(1.0)
    assert not eos.admissible(1.0, 0.0)
    assert eos.admissible(1.0, 0.0, entropy_evolution=False)


@pytest.mark.parametrize("r", [0.0, -1.0, np.nan])
def test_nonpositive_rest_mass_rejected(r):
    eos = EntropicPolytrope(2.0)
    with pytest.raises(InadmissibleState):
        eos.thermo(r, 0.0)
    assert not eos.admissible(r, 0.0)


def test_vectorized_matches_scalar():
    eos = EntropicPolytrope(2.0)
    r = np.array([[0.5, 1.0], [2.0, 3.0]])
    s = np.array([[0.1, -0.2], [0.3, 0.0]])
    t = eos.thermo(r, s)
    for i in range(2):
        for j in range(2):
            assert t.nu2[i, j] == eos.thermo(r[i, j], s[i, j]).nu2


def test_second_derivatives_keys():
    d = EntropicPolytrope(2.0).second_derivatives(1.0, 0.0)
    assert set(d) == {"p_rhorho", "nu2_r", "nu2_s", "p_s", "rho_s"}


def test_make_eos():
    assert isinstance(make_eos("linear", c=0.2), LinearEOS)
    with pytest.raises(ValueError):
        make_eos("tabulated")
    with pytest.raises(ValueError):
        EntropicPolytrope(1.0)
