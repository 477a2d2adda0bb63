"""Special functions for the sphere-plane round-trip operator.

Modified Riccati-Bessel functions

.. math::

    s_l(z) = \\sqrt{\\pi z/2}\\, I_{l+1/2}(z), \\qquad
    e_l(z) = \\sqrt{2z/\\pi}\\, K_{l+1/2}(z)

are kept in logarithmic form since they over- and underflow quickly in both
``l`` and ``z``.  ``s_l`` comes from a downward ratio recurrence seeded by a
continued fraction; ``e_l`` from the (stable) upward recurrence.

Wigner 3j symbols are evaluated exactly with the Racah sum over Python
integers.  Bulk assembly of the round-trip matrix uses the float recurrences
in :mod:`sphereplane._kernels`, which are tested against :func:`wigner3j`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from ._kernels import riccati_log_tables, riccati_tables as _riccati_mantissa
from .errors import DomainError, OrderOverflowError

L_CAP = 300
WIGNER_EXACT_CAP = 120


@dataclass(frozen=True)
class ScaledValue:
    """A real number stored as ``sign * exp(log_magnitude)``."""

    log_magnitude: float
    sign: int

    def __post_init__(self):
        if self.sign not in (-1, 0, 1):
            raise ValueError(f"sign must be -1, 0 or +1, got {self.sign!r}")

    @classmethod
    def from_float(cls, value: float) -> "ScaledValue":
        if value == 0.0:
            return cls(-math.inf, 0)
        return cls(math.log(abs(value)), 1 if value > 0 else -1)

    @classmethod
    def zero(cls) -> "ScaledValue":
        return cls(-math.inf, 0)

    def to_float(self) -> float:
        if self.sign == 0:
            return 0.0
        return self.sign * math.exp(self.log_magnitude)

    __float__ = to_float

    def __neg__(self) -> "ScaledValue":
        return ScaledValue(self.log_magnitude, -self.sign)

    def __mul__(self, other: "ScaledValue") -> "ScaledValue":
        if self.sign == 0 or other.sign == 0:
            return ScaledValue.zero()
        return ScaledValue(self.log_magnitude + other.log_magnitude,
                           self.sign * other.sign)

    def __truediv__(self, other: "ScaledValue") -> "ScaledValue":
        if other.sign == 0:
            raise ZeroDivisionError("division by a zero ScaledValue")
        if self.sign == 0:
            return ScaledValue.zero()
        return ScaledValue(self.log_magnitude - other.log_magnitude,
                           self.sign * other.sign)


@dataclass(frozen=True)
class RiccatiPair:
    """``s_l``, ``e_l`` and their first derivatives at one argument."""

    l: int
    z: float
    s: ScaledValue
    s_prime: ScaledValue
    e: ScaledValue
    e_prime: ScaledValue
    # s*e with exp(+-z) cancelled exactly, and e_{l+1}/e_l + s_{l+1}/s_l
    _se: float = field(default=math.nan, repr=False, compare=False)
    _ratio_sum: float = field(default=math.nan, repr=False, compare=False)

    def wronskian(self) -> float:
        """``s e' - s' e``; analytically equal to -1.

        Uses ``s' = s (l+1)/z + s_{l+1}`` and ``e' = e (l+1)/z - e_{l+1}``, so
        the difference collapses to ``-s e (e_{l+1}/e_l + s_{l+1}/s_l)``
        without cancellation.
        """
        if math.isnan(self._se):
            return (self.s * self.e_prime).to_float() - (self.s_prime * self.e).to_float()
        return -self._se * self._ratio_sum


def _check_argument(z: float):
    if not math.isfinite(z) or z <= 0.0:
        raise DomainError(f"argument must be finite and positive, got z={z!r}")


def riccati_tables(lmax: int, z: float):
    """Log-tables of the Riccati-Bessel functions for ``l = 0..lmax``.

    Returns
    -------
    log_s, s_ratio, log_e, e_ratio : ndarray
        ``log s_l(z)``, ``s_{l+1}/s_l``, ``log e_l(z)`` and ``e_{l+1}/e_l``,
        each of length ``lmax + 1``.

    Notes
    -----
    Logarithmic derivatives follow from the ratios without cancellation::

        s_l'/s_l = (l+1)/z + s_{l+1}/s_l
        e_l'/e_l = (l+1)/z - e_{l+1}/e_l
    """
    _check_argument(z)
    if lmax < 0:
        raise DomainError("lmax must be non-negative")
    return riccati_log_tables(int(lmax), float(z))


def riccati_pair(l: int, z: float) -> RiccatiPair:
    """Scaled ``s_l(z)``, ``e_l(z)`` and derivatives.

    Raises
    ------
    DomainError
        For non-positive or non-finite ``z`` or negative ``l``.
    OrderOverflowError
        For ``l > 300``.
    """
    _check_argument(z)
    if l < 0:
        raise DomainError(f"order must be non-negative, got l={l}")
    if l > L_CAP:
        raise OrderOverflowError(f"order l={l} exceeds supported cap {L_CAP}")
    s_mant, s_exp, s_ratio, e_mant, e_exp, e_ratio = _riccati_mantissa(int(l), float(z))
    log_s = z + math.log(s_mant[l]) + int(s_exp[l]) * math.log(2.0)
    log_e = -z + math.log(e_mant[l]) + int(e_exp[l]) * math.log(2.0)
    psi = (l + 1) / z + s_ratio[l]
    eta = (l + 1) / z - e_ratio[l]
    s = ScaledValue(log_s, 1)
    e = ScaledValue(log_e, 1)
    s_prime = ScaledValue(log_s + math.log(psi), 1)
    if eta == 0.0:
        e_prime = ScaledValue.zero()
    else:
        e_prime = ScaledValue(log_e + math.log(abs(eta)), -1 if eta < 0 else 1)
    se = math.ldexp(float(s_mant[l] * e_mant[l]), int(s_exp[l] + e_exp[l]))
    return RiccatiPair(l=l, z=z, s=s, s_prime=s_prime, e=e, e_prime=e_prime,
                       _se=se, _ratio_sum=float(e_ratio[l] + s_ratio[l]))


def log_bessel_k_half(nmax: int, y: float) -> np.ndarray:
    """``log K_{n+1/2}(y)`` for ``n = 0..nmax``."""
    _check_argument(y)
    _, _, log_e, _ = riccati_log_tables(int(nmax), float(y))
    return log_e + 0.5 * math.log(math.pi / (2.0 * y))


# --- Wigner 3j ---------------------------------------------------------------

@lru_cache(maxsize=None)
def _fact(n: int) -> int:
    return math.factorial(n)


def _triangle_ok(l1, l2, l3):
    return abs(l1 - l2) <= l3 <= l1 + l2


def wigner3j_squared(l1: int, l2: int, l3: int, m1: int, m2: int, m3: int):
    """Exact ``(sign, value**2)`` of the 3j symbol as ``(int, Fraction)``."""
    for l, m in ((l1, m1), (l2, m2), (l3, m3)):
        if l < 0:
            raise DomainError(f"negative angular momentum {l}")
        if abs(m) > l:
            raise DomainError(f"|m|={abs(m)} exceeds l={l}")
    if m1 + m2 + m3 != 0 or not _triangle_ok(l1, l2, l3):
        return 0, Fraction(0)
    if m1 == 0 and m2 == 0 and m3 == 0 and (l1 + l2 + l3) % 2:
        return 0, Fraction(0)

    kmin = max(0, l2 - l3 - m1, l1 - l3 + m2)
    kmax = min(l1 + l2 - l3, l1 - m1, l2 + m2)
    # common denominator keeps the alternating sum in integers
    denoms = []
    for k in range(kmin, kmax + 1):
        denoms.append(_fact(k) * _fact(l3 - l2 + k + m1) * _fact(l3 - l1 + k - m2)
                      * _fact(l1 + l2 - l3 - k) * _fact(l1 - k - m1) * _fact(l2 - k + m2))
    common = math.lcm(*denoms)
    total = 0
    for i, k in enumerate(range(kmin, kmax + 1)):
        term = common // denoms[i]
        total += -term if k % 2 else term
    if total == 0:
        return 0, Fraction(0)

    triangle = Fraction(_fact(l1 + l2 - l3) * _fact(l1 - l2 + l3) * _fact(-l1 + l2 + l3),
                        _fact(l1 + l2 + l3 + 1))
    mfacts = (_fact(l1 + m1) * _fact(l1 - m1) * _fact(l2 + m2) * _fact(l2 - m2)
              * _fact(l3 + m3) * _fact(l3 - m3))
    square = triangle * mfacts * Fraction(total * total, common * common)
    sign = (1 if total > 0 else -1) * (-1 if (l1 - l2 - m3) % 2 else 1)
    return sign, square


def wigner3j(l1: int, l2: int, l3: int, m1: int, m2: int, m3: int) -> float:
    """Wigner 3j symbol ``(l1 l2 l3; m1 m2 m3)`` for integer arguments.

    Evaluated exactly with the Racah formula over big integers and rounded
    once at the end.  Selection-rule violations return exactly ``0.0``.

    Raises
    ------
    DomainError
        If ``|m_i| > l_i`` or any ``l_i < 0``.
    """
    sign, square = wigner3j_squared(l1, l2, l3, m1, m2, m3)
    if sign == 0:
        return 0.0
    # Fraction -> float is correctly rounded; sqrt adds at most half an ulp.
    return sign * math.sqrt(square.numerator / square.denominator)


# --- gamma ratios at negative half-integers ----------------------------------

def log_gamma_ratio_neg_half(l: int, l_prime: int):
    """``(log|G|, sign G)`` for ``G = Gamma(-l+1/2) / (Gamma(-l-l'+1/2) Gamma(l+3/2))``.

    The quotient of the two gammas at negative half-integers is the finite
    Pochhammer product ``prod_{j=0}^{l'-1} (-l-l'+1/2+j)``.
    """
    if l < 1 or l_prime < 1:
        raise DomainError("gamma ratio needs l, l' >= 1")
    log_prod = math.fsum(math.log(k - 0.5) for k in range(l + 1, l + l_prime + 1))
    sign = -1 if l_prime % 2 else 1
    return log_prod - math.lgamma(l + 1.5), sign


def gamma_ratio_neg_half(l: int, l_prime: int) -> float:
    """``Gamma(-l+1/2) / (Gamma(-l-l'+1/2) Gamma(l+3/2))`` via a Pochhammer product."""
    if l < 1 or l_prime < 1:
        raise DomainError("gamma ratio needs l, l' >= 1")
    prod = 1.0
    for j in range(l_prime):
        prod *= -l - l_prime + 0.5 + j
    return prod / math.gamma(l + 1.5) if l < 160 else _ratio_from_log(l, l_prime)


def _ratio_from_log(l, l_prime):
    logv, sign = log_gamma_ratio_neg_half(l, l_prime)
    return sign * math.exp(logv)
