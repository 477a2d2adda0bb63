import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special

from conftest import exact_log_det_one_minus
from sphereplane.errors import DomainError, NonPositiveDeterminant
from sphereplane.materials import MaterialModel, mie_coefficients
from sphereplane.roundtrip import (Geometry, assemble_block, assemble_zero_freq_block,
                                   block_log_dets, default_l_max, frequency_tables,
                                   log_det_one_minus, translation_factors,
                                   zero_block_log_dets)

CONDUCTOR = MaterialModel.perfect_conductor()
MODELS = [CONDUCTOR, MaterialModel.perfect_magnetic(), MaterialModel.constant(3.0, 2.0),
          MaterialModel.plasma_eps(2.0), MaterialModel.plasma_mu(1.5, 2.0),
          MaterialModel.plasma_both(1.0, 3.0)]


def reference_element(geometry, model, m, x, l, lp, p, q):
    """One entry of M straight from the sum over l'' with scipy Bessel functions."""
    total = 0.0
    for lpp in range(abs(l - lp), l + lp + 1):
        h, lam, lam_t = translation_factors(l, lp, lpp, m, x)
        k = special.kv(lpp + 0.5, 2.0 * x)
        total += k * h * (lam if p == q else 1.0)
    if p != q:
        total = total * lam_t
    total *= math.sqrt(math.pi / (4.0 * x))
    d = mie_coefficients(model, lp, x * geometry.rho)
    factor = d.te.to_float() if q == 0 else -d.tm.to_float()
    return total * factor


# --- geometry -----------------------------------------------------------------------------

def test_geometry_validation():
    g = Geometry.from_rho(0.25, L=4.0)
    assert (g.R, g.L, g.rho, g.d) == (1.0, 4.0, 0.25, 3.0)
    for R, L in [(1.0, 1.0), (0.0, 1.0), (2.0, 1.0), (-1.0, 1.0), (math.nan, 1.0)]:
        with pytest.raises(DomainError):
            Geometry(R, L)


def test_default_l_max_grows_near_contact():
    assert default_l_max(0.1) == 8
    values = [default_l_max(r) for r in (0.5, 0.7, 0.9, 0.97)]
    assert values == sorted(values) and values[-1] > 190


# --- translation factors --------------------------------------------------------------------

def test_translation_factor_values():
    h, lam, lam_t = translation_factors(1, 1, 2, 0, 0.5)
    # sqrt(3*3)*5*(3j 1 1 2;000)^2 = 15*(2/15)
    assert h == pytest.approx(2.0, rel=1e-15)
    assert lam == pytest.approx(0.5, rel=1e-15)
    assert lam_t == 0.0
    assert translation_factors(1, 1, 1, 1, 0.5)[:2] == (0.0, pytest.approx(-0.5))
    assert translation_factors(1, 2, 5, 1, 0.5)[:2] == (0.0, 0.0)
    assert translation_factors(2, 2, 0, 1, 0.5)[2] == pytest.approx(2.0 * 0.5 / 6.0)
    with pytest.raises(DomainError):
        translation_factors(1, 3, 2, 2, 0.5)


# --- assembly against the direct sum ----------------------------------------------------------

@pytest.mark.parametrize("model", MODELS[:3])
@pytest.mark.parametrize("m,x", [(0, 0.3), (1, 1.2), (2, 4.0)])
def test_unbalanced_block_matches_direct_sum(model, m, x):
    g = Geometry.from_rho(0.4)
    l_max = 6
    block = assemble_block(g, model, m, x, l_max, balance=False)
    lmin = max(1, m)
    for p in (0, 1):
        for q in (0, 1):
            sub = block.polarization_block(p, q)
            for i, l in enumerate(range(lmin, l_max + 1)):
                for j, lp in enumerate(range(lmin, l_max + 1)):
                    ref = reference_element(g, model, m, x, l, lp, p, q)
                    assert sub[i, j] == pytest.approx(ref, rel=1e-11, abs=1e-15 * abs(sub).max())


# --- zero frequency ----------------------------------------------------------------------------

@pytest.mark.parametrize("rho", [0.2, 0.5])
def test_zero_frequency_leading_entries(rho):
    g = Geometry.from_rho(rho)
    b0 = assemble_zero_freq_block(g, CONDUCTOR, 0, 5)
    b1 = assemble_zero_freq_block(g, CONDUCTOR, 1, 5)
    assert b0.polarization_block(0, 0)[0, 0] == pytest.approx(rho ** 3 / 8, rel=1e-13)
    assert b1.polarization_block(0, 0)[0, 0] == pytest.approx(rho ** 3 / 16, rel=1e-13)
    # (l+1)/l = 2 for the TM l = 1 entry
    assert b0.polarization_block(1, 1)[0, 0] == pytest.approx(rho ** 3 / 4, rel=1e-13)


@pytest.mark.parametrize("model", MODELS)
@pytest.mark.parametrize("m", [0, 1, 3])
def test_zero_limit_of_finite_frequency_block(model, m):
    g = Geometry.from_rho(0.5)
    l_max = 8
    # balanced forms: the unbalanced ones differ by a diagonal similarity
    zero = assemble_zero_freq_block(g, model, m, l_max).entries
    near = assemble_block(g, model, m, 1e-7, l_max).entries
    np.testing.assert_allclose(near, zero, rtol=1e-5, atol=1e-5 * np.abs(zero).max())


def test_zero_frequency_polarisations_decouple():
    b = assemble_zero_freq_block(Geometry.from_rho(0.5), CONDUCTOR, 2, 10)
    assert np.all(b.polarization_block(0, 1) == 0.0)
    assert np.all(b.polarization_block(1, 0) == 0.0)


# --- structural properties ---------------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.sampled_from(MODELS), st.floats(0.05, 0.9), st.floats(0.01, 20.0),
       st.integers(1, 6))
def test_plus_minus_m_determinants_identical(model, rho, x, m):
    g = Geometry.from_rho(rho)
    a = assemble_block(g, model, m, x, 12)
    b = assemble_block(g, model, -m, x, 12)
    assert log_det_one_minus(a.entries, m) == log_det_one_minus(b.entries, -m)
    n = a.size // 2
    np.testing.assert_array_equal(a.entries[:n, n:], -b.entries[:n, n:])


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(MODELS), st.floats(0.05, 0.9), st.floats(0.01, 20.0))
def test_m0_te_tm_additivity(model, rho, x):
    g = Geometry.from_rho(rho)
    a = assemble_block(g, model, 0, x, 14)
    n = a.size // 2
    assert np.all(a.entries[:n, n:] == 0.0) and np.all(a.entries[n:, :n] == 0.0)
    full = log_det_one_minus(a.entries, 0)
    split = log_det_one_minus(a.entries[:n, :n]) + log_det_one_minus(a.entries[n:, n:])
    # an absolute log-det difference is the relative error of det(1 - M)
    assert abs(full - split) <= 1e-14
    tables = frequency_tables(g, model, [x], 14)
    assert block_log_dets(tables, 0)[0] == split


@settings(max_examples=30, deadline=None)
@given(st.sampled_from(MODELS), st.floats(0.05, 0.8), st.floats(0.05, 10.0),
       st.integers(0, 4))
def test_balancing_preserves_determinant(model, rho, x, m):
    g = Geometry.from_rho(rho)
    l_max = 10
    bal = assemble_block(g, model, m, x, l_max)
    raw = assemble_block(g, model, m, x, l_max, balance=False)
    ld_bal = log_det_one_minus(bal.entries, m)
    # the unbalanced entries span dozens of decades, so its float LU is not a
    # trustworthy reference at small x; take its determinant at high precision
    ld_raw = exact_log_det_one_minus(raw.entries)
    assert abs(math.expm1(ld_bal - ld_raw)) <= 1e-12
    # a similarity transform keeps the spectrum
    np.testing.assert_allclose(np.sort_complex(np.linalg.eigvals(bal.entries)),
                               np.sort_complex(np.linalg.eigvals(raw.entries)),
                               atol=1e-12 * max(1.0, np.abs(bal.entries).max()))


def test_balanced_entries_bounded_near_contact():
    g = Geometry.from_rho(0.95)
    block = assemble_block(g, CONDUCTOR, 0, 0.05, 120)
    assert np.all(np.isfinite(block.entries))
    assert np.abs(block.entries).max() < 10.0


@pytest.mark.parametrize("model", MODELS)
def test_determinants_positive_on_grid(model):
    for rho in (0.1, 0.4, 0.8):
        g = Geometry.from_rho(rho)
        l_max = default_l_max(rho) + 10
        xs = [0.1, 1.0, 5.0, 20.0]
        tables = frequency_tables(g, model, xs, l_max)
        for m in range(4):
            assert np.all(np.isfinite(block_log_dets(tables, m)))
        assert np.all(np.isfinite(zero_block_log_dets(g, model, l_max)))


def test_non_positive_determinant_raises():
    with pytest.raises(NonPositiveDeterminant):
        log_det_one_minus(np.diag([2.0, 0.5]))


def test_log_det_series_branch_keeps_tiny_values():
    eps = 1e-12
    a = np.array([[eps, 0.3 * eps], [0.1 * eps, 2 * eps]])
    assert log_det_one_minus(a) == pytest.approx(-3 * eps, rel=1e-10)


def test_large_frequency_decay_rate():
    rho = 0.5
    g = Geometry.from_rho(rho)
    tables = frequency_tables(g, CONDUCTOR, [15.0, 20.0], 16)
    ld = sum(block_log_dets(tables, m) * (1 if m == 0 else 2) for m in range(17))
    # leading behaviour exp(-2 x (1 - rho)) times a slowly varying prefactor
    rate = math.log(ld[1] / ld[0]) / 5.0
    assert rate == pytest.approx(-2.0 * (1.0 - rho), rel=0.05)
