import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sphereplane.errors import DomainError, ModelParameterError
from sphereplane.materials import (MaterialModel, Tag, mie_coefficients, mie_log_table,
                                   zero_frequency_factors, zero_frequency_table)

CONDUCTOR = MaterialModel.perfect_conductor()
MAGNETIC = MaterialModel.perfect_magnetic()


def values(model, lmax, z):
    log_te, sgn_te, log_tm, sgn_tm = mie_log_table(model, lmax, z)
    return sgn_te * np.exp(log_te), sgn_tm * np.exp(log_tm)


# --- construction -------------------------------------------------------------------

def test_constructors_set_only_their_fields():
    assert MaterialModel.constant(8, 10).params() == {"eps0": 8.0, "mu0": 10.0}
    assert MaterialModel.plasma_eps(2.0).params() == {"Omega_p": 2.0, "mu0": 1.0}
    assert MaterialModel.plasma_mu(2.0, eps0=3.0).params() == {"Omega_m": 2.0, "eps0": 3.0}
    assert MaterialModel.plasma_both(1.0, 2.0).params() == {"Omega_p": 1.0, "Omega_m": 2.0}
    assert CONDUCTOR.params() == {}
    assert MaterialModel("const", eps0=2, mu0=2).tag is Tag.ConstantEpsMu


@pytest.mark.parametrize("make", [
    lambda: MaterialModel.constant(0.5, 2.0),
    lambda: MaterialModel.constant(2.0, 0.9),
    lambda: MaterialModel.plasma_eps(0.0),
    lambda: MaterialModel.plasma_mu(-1.0),
    lambda: MaterialModel.plasma_both(1.0, math.inf),
    lambda: MaterialModel(Tag.ConstantEpsMu, eps0=2.0),
    lambda: MaterialModel(Tag.PerfectConductor, eps0=2.0),
])
def test_invalid_parameters_rejected(make):
    with pytest.raises(ModelParameterError):
        make()


def test_eps_mu_plasma_dispersion():
    model = MaterialModel.plasma_both(2.0, 3.0)
    assert model.eps_mu(1.0) == (5.0, 10.0)
    with pytest.raises(ModelParameterError):
        CONDUCTOR.eps_mu(1.0)


# --- frozen values ----------------------------------------------------------------------

def test_conductor_l1_at_unit_argument():
    c = mie_coefficients(CONDUCTOR, 1, 1.0)
    # d_TE = (2/pi) s_1/e_1 = 1/pi, d_TM = (2/pi) s_1'/e_1'
    assert c.te.to_float() == pytest.approx(1.0 / math.pi, rel=1e-14)
    s1p = 2.0 * math.sinh(1.0) - math.cosh(1.0)
    e1p = -3.0 * math.exp(-1.0)
    assert c.tm.to_float() == pytest.approx(2.0 / math.pi * s1p / e1p, rel=1e-14)
    assert c.tm.sign == -1


def test_zero_frequency_factors_frozen():
    assert zero_frequency_factors(CONDUCTOR, 2) == (1.0, 1.5)
    assert zero_frequency_factors(MAGNETIC, 2) == (-1.5, -1.0)
    f_te, f_tm = zero_frequency_factors(MaterialModel.constant(2.0, 5.0), 1)
    # (l+1)(1-mu)/((l+1)+mu l) and -(l+1)(1-eps)/((l+1)+eps l) at l = 1
    assert f_te == pytest.approx(-8.0 / 7.0)
    assert f_tm == pytest.approx(0.5)
    assert zero_frequency_factors(MaterialModel.plasma_both(1.0, 1.0), 3) == (-4 / 3, 4 / 3)


def test_domain_errors():
    with pytest.raises(DomainError):
        mie_coefficients(CONDUCTOR, 0, 1.0)
    with pytest.raises(DomainError):
        mie_coefficients(CONDUCTOR, 1, 0.0)
    with pytest.raises(DomainError):
        zero_frequency_factors(CONDUCTOR, 0)


# --- properties -------------------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(st.floats(1.0, 50.0), st.floats(1.0, 50.0), st.floats(1e-2, 50.0))
def test_eps_mu_duality(eps, mu, z):
    te, tm = values(MaterialModel.constant(eps, mu), 12, z)
    te_d, tm_d = values(MaterialModel.constant(mu, eps), 12, z)
    np.testing.assert_allclose(te, tm_d, rtol=1e-12, atol=1e-300)
    np.testing.assert_allclose(tm, te_d, rtol=1e-12, atol=1e-300)


@pytest.mark.parametrize("z", [0.1, 1.0, 7.0])
def test_perfect_materials_are_dual(z):
    te, tm = values(CONDUCTOR, 10, z)
    te_m, tm_m = values(MAGNETIC, 10, z)
    np.testing.assert_array_equal(te, tm_m)
    np.testing.assert_array_equal(tm, te_m)


@pytest.mark.parametrize("z", [0.05, 1.0, 5.0])
def test_conductor_limits(z):
    te_c, tm_c = values(CONDUCTOR, 8, z)
    for model in (MaterialModel.constant(1e16, 1.0), MaterialModel.plasma_eps(1e9)):
        te, tm = values(model, 8, z)
        np.testing.assert_allclose(te, te_c, rtol=1e-5)
        np.testing.assert_allclose(tm, tm_c, rtol=1e-5)


def test_conductor_limit_rate_is_skin_depth():
    # the deviation scales as the penetration depth, 1/sqrt(eps)
    te_c, _ = values(CONDUCTOR, 4, 1.0)
    err = [np.abs(values(MaterialModel.constant(eps, 1.0), 4, 1.0)[0] / te_c - 1).max()
           for eps in (1e10, 1e14)]
    assert err[0] / err[1] == pytest.approx(100.0, rel=1e-3)


def test_vacuum_sphere_does_not_scatter():
    te, tm = values(MaterialModel.constant(1.0, 1.0), 6, 2.0)
    assert np.all(te == 0.0) and np.all(tm == 0.0)


@pytest.mark.parametrize("model", [
    MaterialModel.constant(2.0, 5.0), MaterialModel.plasma_eps(2.0, 3.0),
    MaterialModel.plasma_mu(1.5, 2.0), MaterialModel.plasma_both(1.0, 2.0), MAGNETIC,
])
def test_static_limit_matches_zero_frequency_factors(model):
    # relative to the conductor, d_l(z) -> f_l as z -> 0
    z = 1e-9
    te, tm = values(model, 5, z)
    te_c, tm_c = values(CONDUCTOR, 5, z)
    f_te, f_tm = zero_frequency_table(model, 5)
    ls = np.arange(1, 6)
    np.testing.assert_allclose(te / te_c, f_te, rtol=1e-5)
    np.testing.assert_allclose(tm / tm_c * (ls + 1) / ls, f_tm, rtol=1e-5)


def test_high_order_coefficients_stay_finite():
    for model in (CONDUCTOR, MaterialModel.constant(3.0, 4.0), MaterialModel.plasma_both(5.0, 0.5)):
        for z in (1e-3, 300.0):
            log_te, _, log_tm, _ = mie_log_table(model, 300, z)
            assert np.all(np.isfinite(log_te)) and np.all(np.isfinite(log_tm))


def test_plasma_static_factor_tends_to_constant_model():
    # Omega -> 0 removes the plasma response
    f_te, f_tm = zero_frequency_table(MaterialModel.plasma_eps(1e-6, mu0=4.0), 4)
    g_te, g_tm = zero_frequency_table(MaterialModel.constant(1.0, 4.0), 4)
    np.testing.assert_allclose(f_te, g_te, rtol=1e-9)
