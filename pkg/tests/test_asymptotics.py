import math
import warnings
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from sphereplane import asymptotics as asy
from sphereplane.asymptotics import (SeriesExpansion, ValidityWarning, eval_series,
                                     f0_large_sep, large_sep_coefficients, large_sep_energy,
                                     n3_expansion, n3_series, pfa_em, pfa_em_composed,
                                     pfa_high_t, pfa_leading, pfa_scalar, pfa_slope)
from sphereplane.errors import DomainError, UnsupportedModel
from sphereplane.materials import MaterialModel

CONDUCTOR = MaterialModel.perfect_conductor()
MAGNETIC = MaterialModel.perfect_magnetic()


# --- large separation ----------------------------------------------------------------

def test_permeable_coefficients_exact():
    s = large_sep_coefficients(MAGNETIC)
    expected = [Fraction(9, 16), Fraction(0), Fraction(25, 32), Fraction(2737, 4096),
                Fraction(12551, 9600), Fraction(-1298187, 163840),
                Fraction(31982323007, 722534400), Fraction(-39548025347, 412876800)]
    assert [c for _, c in s.terms] == expected
    assert all(isinstance(c, Fraction) for _, c in s.terms)
    # c_j multiplies rho**(j-1)
    assert [p for p, _ in s.terms] == list(range(3, 11))


def test_conductor_coefficients_mirror_permeable_leading_terms():
    s = large_sep_coefficients(CONDUCTOR)
    assert s.terms == ((3, Fraction(-9, 16)), (4, Fraction(0)), (5, Fraction(-25, 32)))


def test_const_coefficients_frozen():
    s = large_sep_coefficients(MaterialModel.constant(2.0, 5.0))
    assert s.coefficient(3) == Fraction(-9 * (2 - 5), 8 * 4 * 7)
    assert s.coefficient(4) == 0
    assert s.coefficient(6) == Fraction(128 - 11584 * 2 + 3023 * 4 + 11456 * 5 - 382 * 10
                                        + 5792 * 20 - 2737 * 25 - 5728 * 50 + 32 * 100,
                                        1024 * 16 * 49)


def test_const_coefficients_limit_chain():
    # eps -> infinity, mu -> 0 is the conductor; the reverse is the permeable ball
    big = Fraction(10) ** 12
    cond = dict(asy._const_eps_mu_coefficients(big, 0))
    perm = dict(asy._const_eps_mu_coefficients(0, big))
    assert float(cond[3]) == pytest.approx(-9 / 16, rel=1e-10)
    assert float(cond[5]) == pytest.approx(-25 / 32, rel=1e-10)
    assert float(perm[3]) == pytest.approx(9 / 16, rel=1e-10)
    assert float(perm[5]) == pytest.approx(25 / 32, rel=1e-10)
    # the printed c7 reaches these limits with the opposite sign
    assert float(cond[6]) == pytest.approx(3023 / 4096, rel=1e-10)
    assert float(perm[6]) == pytest.approx(-2737 / 4096, rel=1e-10)


@settings(max_examples=50, deadline=None)
@given(st.fractions(1, 50), st.fractions(1, 50))
def test_const_leading_terms_antisymmetric(eps, mu):
    a = dict(asy._const_eps_mu_coefficients(eps, mu))
    b = dict(asy._const_eps_mu_coefficients(mu, eps))
    assert a[3] == -b[3] and a[5] == -b[5]
    if eps == mu:
        assert a[3] == a[5] == 0


def test_vacuum_sphere_has_no_series():
    assert all(c == 0 for _, c in large_sep_coefficients(MaterialModel.constant(1.0, 1.0)).terms)


@settings(max_examples=50, deadline=None)
@given(st.fractions(Fraction(1, 10), 20), st.fractions(Fraction(1, 10), 20))
def test_plasma_both_coefficients(p, m):
    a = dict(asy._plasma_both_coefficients(p, m))
    b = dict(asy._plasma_both_coefficients(m, p))
    assert a[3] == 0
    assert a[4] == -b[4] and a[5] == -b[5]
    assert a[6] + b[6] == Fraction(-1, 16)
    assert a[4] == -9 * (p ** 2 - m ** 2) / (16 * m * p)


def test_plasma_both_equal_frequencies():
    s = large_sep_coefficients(MaterialModel.plasma_both(2.0, 2.0))
    assert s.terms == ((3, 0), (4, 0), (5, 0), (6, Fraction(-1, 32)))


def test_unsupported_models():
    for model in (MaterialModel.plasma_eps(1.0), MaterialModel.plasma_mu(1.0)):
        with pytest.raises(UnsupportedModel):
            large_sep_coefficients(model)


def test_large_sep_energy_frozen():
    rho = 0.1
    s = large_sep_coefficients(MAGNETIC)
    expected = math.fsum(float(c) * rho ** p for p, c in s.terms) / math.pi
    assert large_sep_energy(MAGNETIC, rho) == pytest.approx(expected, rel=1e-15)
    assert large_sep_energy(MAGNETIC, rho) == pytest.approx(1.8177624085290045e-4, rel=1e-12)
    assert large_sep_energy(MAGNETIC, rho, L=2.0) == pytest.approx(expected / 2, rel=1e-15)


def test_series_expansion_validation():
    with pytest.raises(DomainError):
        SeriesExpansion("rho", ((3, Fraction(1)), (3, Fraction(2))), "")
    s = SeriesExpansion("rho", ((1, Fraction(2)), (2, Fraction(-1))), "")
    assert eval_series(s, 0.5) == pytest.approx(0.75)
    assert s.coefficient(7) == 0


# --- short distances -----------------------------------------------------------------------

def test_pfa_leading_values():
    assert pfa_leading(CONDUCTOR, 0.01, 1.0) == pytest.approx(-math.pi ** 3 / 720 * 1e4)
    assert pfa_leading(MAGNETIC, 0.01, 1.0) == pytest.approx(-7 / 8 * pfa_leading(CONDUCTOR, 0.01, 1.0))
    assert pfa_slope(CONDUCTOR) == pytest.approx(-1.6930903395, rel=1e-9)
    assert pfa_slope(MAGNETIC) == pytest.approx(4.3861806790, rel=1e-9)


@settings(max_examples=50, deadline=None)
@given(st.floats(1e-4, 0.5), st.floats(0.1, 10.0))
def test_em_expansion_is_sum_of_scalar_pieces(ratio, R):
    d = ratio * R
    for model in (CONDUCTOR, MAGNETIC):
        assert pfa_em_composed(model, d, R) == pytest.approx(pfa_em(model, d, R), rel=1e-12)


def test_scalar_neumann_is_robin_minus_half():
    d, R = 0.02, 1.0
    lead = pfa_scalar("NR", d, R, -0.5) / (1 + (1 / 3 + 10 * (-4) / math.pi ** 2) * d / R)
    assert lead == pytest.approx(-math.pi ** 3 / 1440 / d ** 2)
    with pytest.raises(DomainError):
        pfa_scalar("XX", d, R)
    with pytest.raises(DomainError):
        pfa_scalar("DD", 0.0, R)


def test_pfa_unsupported_for_dielectrics():
    with pytest.raises(UnsupportedModel):
        pfa_em(MaterialModel.constant(2.0, 2.0), 0.1, 1.0)


# --- high temperature -------------------------------------------------------------------------

def test_f0_large_sep_values():
    rho = 0.05
    assert f0_large_sep(CONDUCTOR, rho) == pytest.approx(-0.375 * rho ** 3)
    assert f0_large_sep(MAGNETIC, rho) == pytest.approx(0.375 * rho ** 3)
    assert f0_large_sep(MaterialModel.plasma_both(1.0, 2.0), 0.2) == pytest.approx(-3 / 64 * 0.2 ** 6)
    # (1-mu)/(2+mu) - (1-eps)/(2+eps) = -4/7 + 1/4 for (eps, mu) = (2, 5)
    assert f0_large_sep(MaterialModel.constant(2.0, 5.0), rho) == pytest.approx(
        -0.25 * (-4 / 7 + 1 / 4) * rho ** 3)


@settings(max_examples=50, deadline=None)
@given(st.floats(1.0, 100.0), st.floats(1.0, 100.0))
def test_f0_const_antisymmetric(eps, mu):
    a = f0_large_sep(MaterialModel.constant(eps, mu), 0.1)
    b = f0_large_sep(MaterialModel.constant(mu, eps), 0.1)
    assert a == pytest.approx(-b, rel=1e-12, abs=1e-18)


def test_tanh_limits():
    rho = 0.1
    assert f0_large_sep(MaterialModel.plasma_mu(1e3), rho) == pytest.approx(
        f0_large_sep(MAGNETIC, rho), rel=2e-3)
    assert f0_large_sep(MaterialModel.plasma_eps(1e3), rho) == pytest.approx(
        f0_large_sep(CONDUCTOR, rho), rel=2e-3)
    # a vanishing plasma frequency still screens at zero frequency, so only the
    # magnetic part reverts to the constant-mu value: -(1/4)(3/(2+mu)) rho^3
    assert f0_large_sep(MaterialModel.plasma_eps(1e-4, mu0=3.0), rho) == pytest.approx(
        -0.25 * 3.0 / 5.0 * rho ** 3, rel=1e-6)


def test_pfa_high_t_ratios():
    R, d, T = 1.0, 0.01, 1000.0
    c = pfa_high_t(CONDUCTOR, d, R, T)
    assert c == pytest.approx(-1.2020569031595942 * R * T / (4 * d))
    assert pfa_high_t(MAGNETIC, d, R, T) / c == pytest.approx(-0.75)
    assert pfa_high_t(MaterialModel.plasma_both(1.0, 1.0), d, R, T) / c == pytest.approx(0.125)


def test_validity_warnings():
    with pytest.warns(ValidityWarning):
        f0_large_sep(CONDUCTOR, 0.5)
    with pytest.warns(ValidityWarning):
        pfa_high_t(CONDUCTOR, 0.1, 1.0, 1.0)
    with pytest.warns(ValidityWarning):
        n3_series(CONDUCTOR, 0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        f0_large_sep(CONDUCTOR, 0.1)


# --- low temperature -----------------------------------------------------------------------------

def test_n3_series():
    assert n3_expansion(CONDUCTOR).terms == ((3, 1), (6, Fraction(-1, 4)), (9, Fraction(-5, 64)))
    assert n3_series(MAGNETIC, 0.2) == pytest.approx(-0.2 ** 3 + 0.2 ** 6 / 4 - 0.2 ** 9 / 32)
    assert n3_series(MAGNETIC, 0.2) == pytest.approx(-0.007984, rel=1e-3)
    with pytest.raises(UnsupportedModel):
        n3_expansion(MaterialModel.constant(2.0, 2.0))
