"""Round-trip matrix of the sphere-plane system at fixed magnetic number.

For frequency ``x = xi L`` and ``rho = R/L`` the block for magnetic number
``m`` is

.. math::

    M_{ll'}(x) = \\sqrt{\\frac{\\pi}{4x}} \\sum_{l''} K_{l''+1/2}(2x) H^{l''}_{ll'}
        \\begin{pmatrix} \\Lambda^{l''}_{ll'} & \\tilde\\Lambda_{ll'} \\\\
                         \\tilde\\Lambda_{ll'} & \\Lambda^{l''}_{ll'} \\end{pmatrix}
        \\begin{pmatrix} d^{TE}_{l'}(x\\rho) & 0 \\\\ 0 & -d^{TM}_{l'}(x\\rho) \\end{pmatrix}.

Column factors ``t_{l'}`` span hundreds of orders of magnitude, so blocks are
stored balanced: ``B = D^{-1} M D`` with ``D = diag(sgn t / sqrt|t|)``, which
turns ``M = S diag(t)`` into ``sgn(t_i) sqrt|t_i| S_ij sqrt|t_j|``.  All
exponentials are combined in log space before a single ``exp`` per entry.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from ._kernels import (coupling_tensor, fill_block,
                       fill_zero_block, riccati_tables as _riccati_mantissa)
from .errors import BalancingOverflow, DomainError, NonPositiveDeterminant
from .materials import MaterialModel, mie_log_table, zero_frequency_table
from .specfun import wigner3j

_LN2 = math.log(2.0)


@dataclass(frozen=True)
class Geometry:
    """Sphere of radius ``R`` whose centre sits a distance ``L`` from the plate."""

    R: float
    L: float

    def __post_init__(self):
        R, L = float(self.R), float(self.L)
        if not (math.isfinite(R) and math.isfinite(L)) or not 0.0 < R < L:
            raise DomainError(f"need 0 < R < L, got R={self.R!r}, L={self.L!r}")
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "L", L)

    @classmethod
    def from_rho(cls, rho: float, L: float = 1.0) -> "Geometry":
        return cls(R=rho * L, L=L)

    @property
    def rho(self) -> float:
        return self.R / self.L

    @property
    def d(self) -> float:
        return self.L - self.R


@dataclass(frozen=True)
class RoundTripBlock:
    """Dense ``M`` for one ``m``, TE rows/columns first, then TM.

    ``balanced`` tells whether ``entries`` is the similarity-scaled form.
    """

    m: int
    l_min: int
    l_max: int
    x: float
    entries: np.ndarray
    balanced: bool = True

    @property
    def size(self) -> int:
        return 2 * (self.l_max - self.l_min + 1)

    def polarization_block(self, p: int, q: int) -> np.ndarray:
        nl = self.l_max - self.l_min + 1
        return self.entries[p * nl:(p + 1) * nl, q * nl:(q + 1) * nl]


def l_min_for(m: int) -> int:
    return max(1, abs(m))


def default_l_max(rho: float) -> int:
    """Starting truncation before convergence checks."""
    return max(8, math.ceil(6.0 * rho / (1.0 - rho)))


def translation_factors(l: int, l_prime: int, l_dprime: int, m: int, x: float):
    """``(H, Lambda, LambdaTilde)`` for one coupling, using exact 3j symbols."""
    if l < 1 or l_prime < 1:
        raise DomainError("multipole orders must be >= 1")
    if abs(m) > min(l, l_prime):
        raise DomainError(f"|m|={abs(m)} exceeds min(l, l')={min(l, l_prime)}")
    norm = math.sqrt(l * (l + 1.0) * l_prime * (l_prime + 1.0))
    lam_t = 2.0 * m * x / norm
    if not abs(l - l_prime) <= l_dprime <= l + l_prime:
        return 0.0, 0.0, lam_t
    h = (math.sqrt((2 * l + 1) * (2 * l_prime + 1)) * (2 * l_dprime + 1)
         * wigner3j(l, l_prime, l_dprime, 0, 0, 0)
         * wigner3j(l, l_prime, l_dprime, m, -m, 0))
    lam = 0.5 * (l_dprime * (l_dprime + 1.0) - l * (l + 1.0)
                 - l_prime * (l_prime + 1.0)) / norm
    return h, lam, lam_t


def _couplings(m: int, l_max: int):
    # H and Lambda are even in m; only Lambda-tilde, built in the kernel, is odd
    return _couplings_abs(abs(m), l_max)


@lru_cache(maxsize=2)
def _couplings_abs(m: int, l_max: int):
    H, HL = coupling_tensor(m, l_min_for(m), l_max)
    H.setflags(write=False)
    HL.setflags(write=False)
    return H, HL


def _bessel_k_tables(xs, nmax):
    """``log K_{n+1/2}(2x)`` and ``K_{n-3/2}(2x)/K_{n+1/2}(2x)`` per row."""
    nx = len(xs)
    log_k = np.empty((nx, nmax + 1))
    k_down = np.zeros((nx, nmax + 1))
    for ix, x in enumerate(xs):
        y = 2.0 * x
        _, _, _, e_mant, e_exp, e_ratio = _riccati_mantissa(nmax, y)
        # K_{n+1/2}(y) = sqrt(pi/(2y)) e_n(y)
        log_k[ix] = (0.5 * math.log(math.pi / (2.0 * y)) - y
                     + np.log(e_mant) + e_exp * _LN2)
        k_down[ix, 2:] = 1.0 / (e_ratio[:nmax - 1] * e_ratio[1:nmax])
    return log_k, k_down


@dataclass(frozen=True)
class FrequencyTables:
    """Everything about a batch of frequencies that does not depend on ``m``."""

    xs: np.ndarray
    l_max: int
    log_k: np.ndarray
    k_down: np.ndarray
    log_t: np.ndarray   # (nx, 2, l_max) for l = 1..l_max
    sgn_t: np.ndarray


def frequency_tables(geometry: Geometry, model: MaterialModel, xs, l_max: int):
    xs = np.ascontiguousarray(xs, dtype=float)
    if xs.ndim != 1 or np.any(~np.isfinite(xs)) or np.any(xs <= 0.0):
        raise DomainError("frequencies must be finite and > 0")
    log_k, k_down = _bessel_k_tables(xs, 2 * l_max)
    nx = len(xs)
    log_t = np.empty((nx, 2, l_max))
    sgn_t = np.empty((nx, 2, l_max))
    rho = geometry.rho
    for ix, x in enumerate(xs):
        log_te, sgn_te, log_tm, sgn_tm = mie_log_table(model, l_max, x * rho)
        log_t[ix, 0], sgn_t[ix, 0] = log_te, sgn_te
        log_t[ix, 1], sgn_t[ix, 1] = log_tm, -sgn_tm
    return FrequencyTables(xs, l_max, log_k, k_down, log_t, sgn_t)


def balanced_blocks(tables: FrequencyTables, m: int) -> np.ndarray:
    """Balanced ``M`` for every frequency in ``tables``, shape ``(nx, n, n)``."""
    l_max = tables.l_max
    lmin = l_min_for(m)
    if lmin > l_max:
        raise DomainError(f"m={m} exceeds l_max={l_max}")
    H, HL = _couplings(m, l_max)
    nl = l_max - lmin + 1
    out = np.empty((len(tables.xs), 2 * nl, 2 * nl))
    log_t = np.ascontiguousarray(tables.log_t[:, :, lmin - 1:])
    sgn_t = np.ascontiguousarray(tables.sgn_t[:, :, lmin - 1:])
    fill_block(m, lmin, H, HL, tables.xs, tables.log_k, tables.k_down,
                         log_t, sgn_t, out)
    if not np.all(np.isfinite(out)):
        raise BalancingOverflow(
            f"non-finite round-trip entries at m={m}, l_max={l_max}")
    return out


def _zero_tables(geometry: Geometry, model: MaterialModel, l_max: int):
    ls = np.arange(1, l_max + 1)
    log_g = np.array([(2 * l + 1) * math.log(geometry.rho / 2.0)
                      - math.lgamma(l + 0.5) - math.lgamma(l + 1.5) for l in ls])
    f_te, f_tm = zero_frequency_table(model, l_max)
    f = np.vstack([f_te, f_tm])
    with np.errstate(divide="ignore"):
        log_f = np.log(np.abs(f))
    return log_g, log_f, np.sign(f)


def balanced_zero_block(geometry: Geometry, model: MaterialModel, m: int,
                         l_max: int, _tables=None) -> np.ndarray:
    """Balanced ``M(0)`` for one ``m``."""
    lmin = l_min_for(m)
    if lmin > l_max:
        raise DomainError(f"m={m} exceeds l_max={l_max}")
    log_g, log_f, sgn_f = _tables or _zero_tables(geometry, model, l_max)
    _, HL = _couplings(m, l_max)
    nl = l_max - lmin + 1
    out = np.empty((2 * nl, 2 * nl))
    fill_zero_block(lmin, HL, np.ascontiguousarray(log_g[lmin - 1:]),
                              np.ascontiguousarray(log_f[:, lmin - 1:]),
                              np.ascontiguousarray(sgn_f[:, lmin - 1:]), out)
    if not np.all(np.isfinite(out)):
        raise BalancingOverflow(f"non-finite zero-frequency entries at m={m}")
    return out


def _check_block_args(m, l_max):
    if l_max < l_min_for(m):
        raise DomainError(f"l_max={l_max} below l_min={l_min_for(m)}")


def _unbalanced(geometry, model, m, x, l_max, log_t, sgn_t, zero=False):
    """Unbalanced ``M``: rebuild ``S`` with unit factors, then rescale.

    Finite frequency follows the column form ``S diag(t)``; the zero-frequency
    closed form carries its factors on the row index, ``diag(t) S``.
    """
    lmin = l_min_for(m)
    nl = l_max - lmin + 1
    ones = np.zeros_like(log_t)
    signs = np.ones_like(sgn_t)
    if zero:
        _, HL = _couplings(m, l_max)
        log_g = np.zeros(nl)
        out = np.empty((2 * nl, 2 * nl))
        fill_zero_block(lmin, HL, log_g, ones, signs, out)
    else:
        tables = frequency_tables(geometry, model, [x], l_max)
        H, HL = _couplings(m, l_max)
        out = np.empty((1, 2 * nl, 2 * nl))
        fill_block(m, lmin, H, HL, tables.xs, tables.log_k,
                             tables.k_down, ones[None], signs[None], out)
        out = out[0]
    S = out
    with np.errstate(over="ignore"):
        t = (sgn_t * np.exp(log_t)).reshape(-1)
    M = S * t[:, None] if zero else S * t[None, :]
    if not np.all(np.isfinite(M)):
        raise BalancingOverflow("unbalanced entries leave the floating-point range")
    return M


def assemble_block(geometry: Geometry, model: MaterialModel, m: int, x: float,
                   l_max: int, balance: bool = True) -> RoundTripBlock:
    """``M^{(m)}(x)`` for ``x > 0``.

    Raises
    ------
    BalancingOverflow
        If entries cannot be represented even after balancing.
    """
    _check_block_args(m, l_max)
    if not math.isfinite(x) or x <= 0.0:
        raise DomainError(f"assemble_block needs x > 0, got {x!r}")
    tables = frequency_tables(geometry, model, [x], l_max)
    if balance:
        entries = balanced_blocks(tables, m)[0]
    else:
        lmin = l_min_for(m)
        entries = _unbalanced(geometry, model, m, x, l_max,
                              tables.log_t[0][:, lmin - 1:], tables.sgn_t[0][:, lmin - 1:])
    entries.setflags(write=False)
    return RoundTripBlock(m, l_min_for(m), l_max, float(x), entries, balance)


def assemble_zero_freq_block(geometry: Geometry, model: MaterialModel, m: int,
                             l_max: int, balance: bool = True) -> RoundTripBlock:
    """``M^{(m)}(0)`` from the closed-form top coupling ``l'' = l + l'``."""
    _check_block_args(m, l_max)
    lmin = l_min_for(m)
    if balance:
        entries = balanced_zero_block(geometry, model, m, l_max)
    else:
        log_g, log_f, sgn_f = _zero_tables(geometry, model, l_max)
        # unbalanced: row/column factors g_l' f_l' with the L^(l-l') similarity dropped
        log_t = log_f[:, lmin - 1:] + log_g[None, lmin - 1:]
        entries = _unbalanced(geometry, model, m, 0.0, l_max, log_t,
                              sgn_f[:, lmin - 1:], zero=True)
    entries.setflags(write=False)
    return RoundTripBlock(m, lmin, l_max, 0.0, entries, balance)


def _slogdet(a, m, label):
    sign, logdet = np.linalg.slogdet(a)
    bad = sign <= 0
    if np.any(bad):
        raise NonPositiveDeterminant(
            f"det(1 - M) <= 0 at m={m} ({label}); truncation or scaling failure")
    return logdet


_SERIES_NORM = 1e-3


def _log_det_series(mat):
    """``log det(1 - M) = -sum_k tr(M^k)/k`` for small ``||M||``.

    Keeps full relative accuracy where ``1 - M`` would round to the identity.
    """
    power = mat
    total = -np.trace(power)
    k = 1
    while True:
        k += 1
        power = power @ mat
        term = np.trace(power) / k
        total -= term
        if abs(term) <= 1e-17 * abs(total) or k > 60:
            return total


def _log_dets(mats, m, label):
    """``log det(1 - M)`` for a stack of matrices ``M``."""
    out = np.empty(mats.shape[0])
    eye = np.eye(mats.shape[1])
    lu_rows = []
    for ix in range(mats.shape[0]):
        if np.linalg.norm(mats[ix]) < _SERIES_NORM:
            out[ix] = _log_det_series(mats[ix])
        else:
            lu_rows.append(ix)
    if lu_rows:
        out[lu_rows] = _slogdet(eye - mats[lu_rows], m, label)
    return out


def log_det_one_minus(entries: np.ndarray, m: int = 0) -> float:
    """``log det(1 - M)`` of one dense matrix, with positivity check."""
    return float(_log_dets(np.asarray(entries)[None], m, "dense")[0])


def block_log_dets(tables: FrequencyTables, m: int) -> np.ndarray:
    """``log det(1 - M^{(m)}(x))`` for each ``x`` in ``tables``."""
    a = balanced_blocks(tables, m)
    if m == 0:
        # TE and TM decouple; two half-size factorisations
        n = a.shape[1] // 2
        return _log_dets(a[:, :n, :n], m, "TE") + _log_dets(a[:, n:, n:], m, "TM")
    return _log_dets(a, m, "x > 0")


def zero_block_log_dets(geometry: Geometry, model: MaterialModel, l_max: int):
    """``log det(1 - M^{(m)}(0))`` for ``m = 0..l_max``."""
    tabs = _zero_tables(geometry, model, l_max)
    out = np.empty(l_max + 1)
    for m in range(l_max + 1):
        a = balanced_zero_block(geometry, model, m, l_max, tabs)
        n = a.shape[0] // 2
        # polarisations never couple at zero frequency
        out[m] = (_log_dets(a[None, :n, :n], m, "TE, x = 0")[0]
                  + _log_dets(a[None, n:, n:], m, "TM, x = 0")[0])
    return out
