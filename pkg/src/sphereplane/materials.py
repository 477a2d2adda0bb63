"""Sphere response at imaginary frequency.

For a sphere with permittivity ``eps`` and permeability ``mu`` the T-matrix
diagonal is

.. math::

    d_l^{TE}(z) = \\frac{2}{\\pi}
        \\frac{\\sqrt{\\varepsilon}\\, s_l(z) s_l'(nz) - \\sqrt{\\mu}\\, s_l'(z) s_l(nz)}
             {\\sqrt{\\varepsilon}\\, e_l(z) s_l'(nz) - \\sqrt{\\mu}\\, e_l'(z) s_l(nz)},
    \\qquad n = \\sqrt{\\varepsilon\\mu},

and ``d^TM`` follows from ``eps <-> mu``.  Everything is evaluated through the
ratios ``s_{l+1}/s_l`` and ``e_{l+1}/e_l`` so that the leading ``(l+1)/z``
parts of the logarithmic derivatives cancel analytically rather than
numerically.

Plasma frequencies are stored dimensionless, ``Omega = omega R``, and the
argument is ``z = xi R``, so ``eps(z) = 1 + Omega**2 / z**2``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from ._kernels import riccati_tables
from .errors import DomainError, ModelParameterError
from .specfun import ScaledValue

_LOG_2_OVER_PI = math.log(2.0 / math.pi)
_LN2 = math.log(2.0)


class Tag(str, enum.Enum):
    PerfectConductor = "perfect-conductor"
    PerfectMagnetic = "perfect-magnetic"
    ConstantEpsMu = "const"
    PlasmaEps = "plasma-eps"
    PlasmaMu = "plasma-mu"
    PlasmaBoth = "plasma-both"


_REQUIRED = {
    Tag.PerfectConductor: (),
    Tag.PerfectMagnetic: (),
    Tag.ConstantEpsMu: ("eps0", "mu0"),
    Tag.PlasmaEps: ("Omega_p", "mu0"),
    Tag.PlasmaMu: ("Omega_m", "eps0"),
    Tag.PlasmaBoth: ("Omega_p", "Omega_m"),
}


@dataclass(frozen=True)
class MaterialModel:
    """One of the six sphere responses.

    Only the fields belonging to ``tag`` are set; use the classmethod
    constructors rather than building instances by hand.
    """

    tag: Tag
    eps0: Optional[float] = None
    mu0: Optional[float] = None
    Omega_p: Optional[float] = None
    Omega_m: Optional[float] = None

    def __post_init__(self):
        tag = Tag(self.tag)
        object.__setattr__(self, "tag", tag)
        needed = _REQUIRED[tag]
        for name in ("eps0", "mu0", "Omega_p", "Omega_m"):
            value = getattr(self, name)
            if name in needed:
                if value is None:
                    raise ModelParameterError(f"{tag.name} requires {name}")
                value = float(value)
                object.__setattr__(self, name, value)
                if not math.isfinite(value):
                    raise ModelParameterError(f"{name} must be finite")
                if name in ("eps0", "mu0") and value < 1.0:
                    raise ModelParameterError(f"{name} must be >= 1, got {value}")
                if name.startswith("Omega") and value <= 0.0:
                    raise ModelParameterError(f"{name} must be > 0, got {value}")
            elif value is not None:
                raise ModelParameterError(f"{tag.name} does not take {name}")

    @classmethod
    def perfect_conductor(cls):
        return cls(Tag.PerfectConductor)

    @classmethod
    def perfect_magnetic(cls):
        return cls(Tag.PerfectMagnetic)

    @classmethod
    def constant(cls, eps: float, mu: float):
        return cls(Tag.ConstantEpsMu, eps0=eps, mu0=mu)

    @classmethod
    def plasma_eps(cls, Omega_p: float, mu0: float = 1.0):
        return cls(Tag.PlasmaEps, Omega_p=Omega_p, mu0=mu0)

    @classmethod
    def plasma_mu(cls, Omega_m: float, eps0: float = 1.0):
        return cls(Tag.PlasmaMu, Omega_m=Omega_m, eps0=eps0)

    @classmethod
    def plasma_both(cls, Omega_p: float, Omega_m: float):
        return cls(Tag.PlasmaBoth, Omega_p=Omega_p, Omega_m=Omega_m)

    def params(self) -> dict:
        """The set parameters, in a fixed order."""
        return {name: getattr(self, name) for name in _REQUIRED[self.tag]}

    def eps_mu(self, z: float):
        """``(eps, mu)`` at dimensionless imaginary frequency ``z = xi R``."""
        tag = self.tag
        if tag is Tag.ConstantEpsMu:
            return self.eps0, self.mu0
        if tag is Tag.PlasmaEps:
            return 1.0 + (self.Omega_p / z) ** 2, self.mu0
        if tag is Tag.PlasmaMu:
            return self.eps0, 1.0 + (self.Omega_m / z) ** 2
        if tag is Tag.PlasmaBoth:
            return 1.0 + (self.Omega_p / z) ** 2, 1.0 + (self.Omega_m / z) ** 2
        raise ModelParameterError(f"{tag.name} has no finite eps/mu")


@dataclass(frozen=True)
class MieCoefficient:
    l: int
    te: ScaledValue
    tm: ScaledValue
    z: float


def _log_abs_sign(values):
    values = np.asarray(values, dtype=float)
    with np.errstate(divide="ignore"):
        return np.log(np.abs(values)), np.sign(values)


def _tables(lmax, z):
    """``log(s_l/e_l)``, ``s_{l+1}/s_l``, ``e_{l+1}/e_l`` for ``l = 0..lmax``."""
    s_mant, s_exp, s_ratio, e_mant, e_exp, e_ratio = riccati_tables(lmax, z)
    log_s_over_e = 2.0 * z + np.log(s_mant / e_mant) + (s_exp - e_exp) * _LN2
    return log_s_over_e, s_ratio, e_ratio


def _dielectric_ratio(ls, z, sqrt_a, sqrt_b, r_inner, r_z, q_z):
    """``num/den`` of the general coefficient with ``a`` in front of ``s'(nz)``.

    With ``a = eps, b = mu`` this is the TE ratio, with ``a = mu, b = eps`` TM.
    """
    lead = (ls + 1.0) / z * (1.0 / sqrt_b - sqrt_b)
    num = lead + sqrt_a * r_inner - sqrt_b * r_z
    den = lead + sqrt_a * r_inner + sqrt_b * q_z
    return num, den


def mie_log_table(model: MaterialModel, lmax: int, z: float):
    """Log-magnitudes and signs of ``d^TE_l(z)``, ``d^TM_l(z)`` for ``l = 1..lmax``.

    Returns
    -------
    log_te, sgn_te, log_tm, sgn_tm : ndarray of length ``lmax``
    """
    if not math.isfinite(z) or z <= 0.0:
        raise DomainError(f"Mie coefficients need z > 0, got {z!r}")
    log_se, r_z, q_z = _tables(lmax, z)
    ls = np.arange(1, lmax + 1, dtype=float)
    base = _LOG_2_OVER_PI + log_se[1:]
    r_z = r_z[1:]
    q_z = q_z[1:]
    tag = model.tag

    if tag in (Tag.PerfectConductor, Tag.PerfectMagnetic):
        psi = (ls + 1.0) / z + r_z
        eta = (ls + 1.0) / z - q_z
        log_a, sgn_a = base, np.ones(lmax)
        log_b = base + np.log(psi) - np.log(np.abs(eta))
        sgn_b = np.sign(psi * eta)
        if tag is Tag.PerfectConductor:
            return log_a, sgn_a, log_b, sgn_b
        return log_b, sgn_b, log_a, sgn_a

    eps, mu = model.eps_mu(z)
    n = math.sqrt(eps * mu)
    _, r_w, _ = _tables(lmax, n * z)
    r_w = r_w[1:]
    se, sm = math.sqrt(eps), math.sqrt(mu)
    num_te, den_te = _dielectric_ratio(ls, z, se, sm, r_w, r_z, q_z)
    num_tm, den_tm = _dielectric_ratio(ls, z, sm, se, r_w, r_z, q_z)
    lnum_te, snum_te = _log_abs_sign(num_te)
    lnum_tm, snum_tm = _log_abs_sign(num_tm)
    log_te = base + lnum_te - np.log(np.abs(den_te))
    log_tm = base + lnum_tm - np.log(np.abs(den_tm))
    return log_te, snum_te * np.sign(den_te), log_tm, snum_tm * np.sign(den_tm)


def mie_coefficients(model: MaterialModel, l: int, z: float) -> MieCoefficient:
    """``d_l^{TE}(z)`` and ``d_l^{TM}(z)`` in scaled form.

    Raises
    ------
    DomainError
        If ``z <= 0`` or ``l < 1``.
    """
    if l < 1:
        raise DomainError(f"multipole order must be >= 1, got {l}")
    log_te, sgn_te, log_tm, sgn_tm = mie_log_table(model, l, z)

    def scaled(logv, sgn):
        return ScaledValue.zero() if sgn == 0 else ScaledValue(float(logv), int(sgn))

    return MieCoefficient(l=l, te=scaled(log_te[-1], sgn_te[-1]),
                          tm=scaled(log_tm[-1], sgn_tm[-1]), z=z)


def _plasma_static_ratio(ls, Omega, sqrt_c):
    """``[Omega s'(w) - c s(w)(l+1)] / [Omega s'(w) + c s(w) l]`` at ``w = Omega c``."""
    lmax = int(ls[-1])
    _, r_w, _ = _tables(lmax, Omega * sqrt_c)
    r_w = r_w[1:]
    num = (ls + 1.0) * (1.0 / sqrt_c - sqrt_c) + Omega * r_w
    den = (ls + 1.0) / sqrt_c + sqrt_c * ls + Omega * r_w
    return num / den


def zero_frequency_table(model: MaterialModel, lmax: int):
    """``(fTE, fTM)`` arrays for ``l = 1..lmax``; see :func:`zero_frequency_factors`."""
    ls = np.arange(1, lmax + 1, dtype=float)
    ratio = (ls + 1.0) / ls
    tag = model.tag
    if tag is Tag.PerfectConductor:
        return np.ones(lmax), ratio
    if tag is Tag.PerfectMagnetic:
        return -ratio, -np.ones(lmax)
    if tag is Tag.ConstantEpsMu:
        eps, mu = model.eps0, model.mu0
        f_te = (ls + 1.0) * (1.0 - mu) / ((ls + 1.0) + mu * ls)
        f_tm = -(ls + 1.0) * (1.0 - eps) / ((ls + 1.0) + eps * ls)
        return f_te, f_tm
    if tag is Tag.PlasmaEps:
        return _plasma_static_ratio(ls, model.Omega_p, math.sqrt(model.mu0)), ratio
    if tag is Tag.PlasmaMu:
        return -ratio, -_plasma_static_ratio(ls, model.Omega_m, math.sqrt(model.eps0))
    if tag is Tag.PlasmaBoth:
        return -ratio, ratio
    raise ModelParameterError(f"unknown material {tag!r}")


def zero_frequency_factors(model: MaterialModel, l: int):
    """Polarisation factors multiplying the material-neutral ``M(0)`` row ``l``.

    The TM factor already includes the sign that ``d^TM`` carries in the
    round-trip matrix, so for a perfect conductor the pair is ``(1, (l+1)/l)``.
    """
    if l < 1:
        raise DomainError(f"multipole order must be >= 1, got {l}")
    f_te, f_tm = zero_frequency_table(model, l)
    return float(f_te[-1]), float(f_tm[-1])
