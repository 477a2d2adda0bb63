"""Closed-form limits of the sphere-plane energies.

Series coefficients are kept as :class:`fractions.Fraction`; material
parameters given as floats enter through their exact binary values, so a
table entry is exactly the printed rational expression evaluated at the
stored parameters.  Plasma strengths are the dimensionless ``Omega = omega R``
throughout, which is also how the explicit ``1/R^2`` and ``1/R^4`` terms of
the plasma ``c_7`` are read (they become plain numbers).
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Tuple

from scipy.special import zeta

from .errors import DomainError, UnsupportedModel
from .materials import MaterialModel, Tag

_ZETA3 = float(zeta(3.0))


class ValidityWarning(UserWarning):
    """An asymptotic formula was evaluated outside its stated range."""


@dataclass(frozen=True)
class SeriesExpansion:
    """``sum coefficient * variable**power`` with strictly increasing powers."""

    variable: str
    terms: Tuple[Tuple[int, Fraction], ...]
    validity_note: str = field(default="", compare=False)

    def __post_init__(self):
        if self.variable not in ("rho", "d_over_R"):
            raise DomainError(f"unknown series variable {self.variable!r}")
        powers = [p for p, _ in self.terms]
        if any(b <= a for a, b in zip(powers, powers[1:])):
            raise DomainError("series powers must be strictly increasing")

    def coefficient(self, power) -> Fraction:
        for p, c in self.terms:
            if p == power:
                return c
        return Fraction(0)


def eval_series(series: SeriesExpansion, value: float, prefactor: float = 1.0) -> float:
    """``prefactor * sum c value**p``, accumulated from the lowest power up."""
    total = 0.0
    for power, coeff in series.terms:
        total += float(coeff) * value ** power
    return prefactor * total


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


_PERMEABLE = (Fraction(9, 16), Fraction(0), Fraction(25, 32), Fraction(2737, 4096),
              Fraction(12551, 9600), Fraction(-1298187, 163840),
              Fraction(31982323007, 722534400), Fraction(-39548025347, 412876800))


def _const_eps_mu_coefficients(eps, mu):
    e, u = _frac(eps), _frac(mu)
    c4 = -9 * (e - u) / (8 * (2 + e) * (2 + u))
    c6 = (-3 * (e - u)
          * (380 + 320 * (e + u) + 50 * (e ** 2 + u ** 2) + 217 * e * u
             + 8 * e * u * (e + u) - 11 * e ** 2 * u ** 2
             + 3 * e ** 2 * u ** 2 * (e + u) + 2 * e ** 3 * u ** 3)
          / (8 * (2 + e) ** 2 * (3 + 2 * e) * (2 + u) ** 2 * (3 + 2 * u)))
    c7 = ((128 - 11584 * e + 3023 * e ** 2 + 11456 * u - 382 * e * u + 5792 * e ** 2 * u
           - 2737 * u ** 2 - 5728 * e * u ** 2 + 32 * e ** 2 * u ** 2)
          / (1024 * (2 + e) ** 2 * (2 + u) ** 2))
    return [(3, c4), (4, Fraction(0)), (5, c6), (6, c7)]


def _plasma_both_coefficients(Omega_p, Omega_m):
    p, m = _frac(Omega_p), _frac(Omega_m)
    c5 = -9 * (p ** 2 - m ** 2) / (16 * m * p)
    c6 = 15 * (p ** 4 - m ** 4) / (16 * m ** 2 * p ** 2)
    # printed form kept verbatim, including the doubled 256 in the third term
    c7 = (Fraction(-1, 32)
          - Fraction(135, 64) * (p ** 6 - m ** 6) / (m ** 3 * p ** 3)
          - Fraction(415, 256) * (m ** 2 - p ** 2) / (256 * m * p)
          - Fraction(135, 64) * (p ** 2 - m ** 2) / (m ** 3 * p ** 3)
          + Fraction(125, 128) * (p ** 4 - m ** 4) / (m ** 3 * p ** 3))
    return [(3, Fraction(0)), (4, c5), (5, c6), (6, c7)]


def large_sep_coefficients(model: MaterialModel) -> SeriesExpansion:
    """Coefficients of ``E0 = 1/(pi L) sum_j c_j rho**(j-1)``; power ``j-1`` is stored.

    Raises
    ------
    UnsupportedModel
        For the single-plasma models, which have no published series.
    """
    tag = model.tag
    note = "large separation, rho -> 0"
    if tag is Tag.PerfectMagnetic:
        terms = [(j + 3, c) for j, c in enumerate(_PERMEABLE)]
    elif tag is Tag.PerfectConductor:
        # only the three leading terms share magnitude with the permeable case
        terms = [(3, -_PERMEABLE[0]), (4, Fraction(0)), (5, -_PERMEABLE[2])]
    elif tag is Tag.ConstantEpsMu:
        terms = _const_eps_mu_coefficients(model.eps0, model.mu0)
    elif tag is Tag.PlasmaBoth:
        terms = _plasma_both_coefficients(model.Omega_p, model.Omega_m)
    else:
        raise UnsupportedModel(f"no large-separation series for {tag.name}")
    return SeriesExpansion("rho", tuple(terms), note)


def large_sep_energy(model: MaterialModel, rho: float, L: float = 1.0) -> float:
    """``E0`` from the large-separation series."""
    return eval_series(large_sep_coefficients(model), rho, 1.0 / (math.pi * L))


# --- short distances ---------------------------------------------------------

_SCALAR_KINDS = ("DD", "ND", "NR", "DR")


def _check_gap(d, R):
    if not (d > 0.0 and R > 0.0):
        raise DomainError(f"need d > 0 and R > 0, got d={d!r}, R={R!r}")


def pfa_scalar(kind: str, d: float, R: float, robin_u: float = 0.5) -> float:
    """Two leading short-distance terms of the scalar energy for plane/sphere conditions.

    ``kind`` is the plane condition (Dirichlet or Neumann) followed by the
    sphere condition (Dirichlet or Robin with parameter ``robin_u``; Neumann
    is ``robin_u = -1/2``).
    """
    _check_gap(d, R)
    if kind not in _SCALAR_KINDS:
        raise DomainError(f"kind must be one of {_SCALAR_KINDS}, got {kind!r}")
    pi2 = math.pi ** 2
    if kind in ("DD", "NR"):
        lead = -math.pi ** 3 * R / (1440.0 * d ** 2)
        slope = 1.0 / 3.0 if kind == "DD" else 1.0 / 3.0 + 10.0 * (6.0 * robin_u - 1.0) / pi2
    else:
        lead = 7.0 * math.pi ** 3 * R / (11520.0 * d ** 2)
        slope = (1.0 / 3.0 if kind == "ND"
                 else 1.0 / 3.0 + 40.0 * (6.0 * robin_u - 1.0) / (7.0 * pi2))
    return lead * (1.0 + slope * d / R)


def delta_e(d: float, R: float) -> float:
    """Geometric correction shared by both polarisations, ``R/(4 pi d^2) * (pi^2/6) d/R``."""
    _check_gap(d, R)
    return R / (4.0 * math.pi * d ** 2) * (math.pi ** 2 / 6.0) * (d / R)


def pfa_em_composed(model: MaterialModel, d: float, R: float) -> float:
    """Electromagnetic short-distance energy assembled from the scalar pieces."""
    if model.tag is Tag.PerfectConductor:
        return pfa_scalar("DD", d, R) + pfa_scalar("NR", d, R, 0.5) + delta_e(d, R)
    if model.tag is Tag.PerfectMagnetic:
        return pfa_scalar("DR", d, R, 0.5) + pfa_scalar("ND", d, R) + delta_e(d, R)
    raise UnsupportedModel(f"no short-distance expansion for {model.tag.name}")


def pfa_leading(model: MaterialModel, d: float, R: float) -> float:
    """Leading PFA term alone."""
    _check_gap(d, R)
    if model.tag is Tag.PerfectConductor:
        return -math.pi ** 3 * R / (720.0 * d ** 2)
    if model.tag is Tag.PerfectMagnetic:
        return 7.0 * math.pi ** 3 * R / (5760.0 * d ** 2)
    raise UnsupportedModel(f"no short-distance expansion for {model.tag.name}")


def pfa_slope(model: MaterialModel) -> float:
    """Coefficient of ``d/R`` in the bracket multiplying the leading PFA term."""
    if model.tag is Tag.PerfectConductor:
        return 1.0 / 3.0 - 20.0 / math.pi ** 2
    if model.tag is Tag.PerfectMagnetic:
        return 1.0 / 3.0 + 40.0 / math.pi ** 2
    raise UnsupportedModel(f"no short-distance expansion for {model.tag.name}")


def pfa_em(model: MaterialModel, d: float, R: float) -> float:
    """``E = E_lead (1 + slope d/R)`` for a perfectly conducting or permeable sphere."""
    return pfa_leading(model, d, R) * (1.0 + pfa_slope(model) * d / R)


# --- high temperature ---------------------------------------------------------

def _tanh_ratio(c, Omega):
    """``[-sqrt(c) W + (1 + c W^2) th] / [(c - 1) sqrt(c) W + (1 + c W^2 - c) th]``, ``th = tanh(sqrt(c) W)``."""
    s = math.sqrt(c)
    th = math.tanh(s * Omega)
    num = -s * Omega + (1.0 + c * Omega ** 2) * th
    den = (c - 1.0) * s * Omega + ((1.0 + c * Omega ** 2) - c) * th
    return num / den


def f0_large_sep(model: MaterialModel, rho: float) -> float:
    """Leading large-separation ``F0`` (coefficient of ``T`` in the free energy)."""
    if not 0.0 < rho < 1.0:
        raise DomainError(f"rho must lie in (0, 1), got {rho!r}")
    if rho > 0.3:
        warnings.warn(f"large-separation F0 used at rho={rho}", ValidityWarning, stacklevel=2)
    tag = model.tag
    r3 = rho ** 3
    if tag is Tag.PerfectConductor:
        return -0.375 * r3
    if tag is Tag.PerfectMagnetic:
        return 0.375 * r3
    if tag is Tag.ConstantEpsMu:
        eps, mu = model.eps0, model.mu0
        return -0.25 * ((1.0 - mu) / (2.0 + mu) - (1.0 - eps) / (2.0 + eps)) * r3
    if tag is Tag.PlasmaEps:
        return -0.375 * _tanh_ratio(model.mu0, model.Omega_p) * r3
    if tag is Tag.PlasmaMu:
        return 0.375 * _tanh_ratio(model.eps0, model.Omega_m) * r3
    if tag is Tag.PlasmaBoth:
        return -3.0 / 64.0 * rho ** 6
    raise UnsupportedModel(f"unknown material {tag!r}")


def pfa_high_t(model: MaterialModel, d: float, R: float, T: float) -> float:
    """Short-distance classical free energy, valid for ``1 << d T << R T``."""
    _check_gap(d, R)
    if not T > 0.0:
        raise DomainError(f"temperature must be > 0, got {T!r}")
    if not 1.0 < d * T < R * T:
        warnings.warn(f"high-temperature PFA used at dT={d * T:g}, RT={R * T:g}",
                      ValidityWarning, stacklevel=2)
    tag = model.tag
    if tag is Tag.PerfectConductor:
        return -_ZETA3 * R * T / (4.0 * d)
    if tag is Tag.PerfectMagnetic:
        return 3.0 * _ZETA3 * R * T / (16.0 * d)
    if tag is Tag.PlasmaBoth:
        return -T / 32.0 * (R / d) * _ZETA3
    raise UnsupportedModel(f"no high-temperature PFA for {tag.name}")


# --- low temperature ------------------------------------------------------------

_N3 = {
    Tag.PerfectConductor: ((3, Fraction(1)), (6, Fraction(-1, 4)), (9, Fraction(-5, 64))),
    Tag.PerfectMagnetic: ((3, Fraction(-1)), (6, Fraction(1, 4)), (9, Fraction(-1, 32))),
}


def n3_expansion(model: MaterialModel) -> SeriesExpansion:
    if model.tag not in _N3:
        raise UnsupportedModel(f"no N3 series for {model.tag.name}")
    return SeriesExpansion("rho", _N3[model.tag], "large separation, rho <= 0.4")


def n3_series(model: MaterialModel, rho: float) -> float:
    """Small-``rho`` series of the cubic low-frequency coefficient ``N3``."""
    series = n3_expansion(model)
    if rho > 0.4:
        warnings.warn(f"N3 series used at rho={rho}", ValidityWarning, stacklevel=2)
    return eval_series(series, rho)
