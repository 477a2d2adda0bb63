"""Energies from ``log det(1 - M)``.

``trace_log(x)`` is ``sum_m w_m log det(1 - M^{(m)}(x))`` with ``w_0 = 1`` and
``w_{m>0} = 2``; the ``-m`` blocks are copies of the ``+m`` ones.  In units
``hbar = c = k_B = 1`` and with ``x = xi L``:

* zero temperature: ``E0 = 1/(2 pi L) * int_0^inf trace_log(x) dx``
* Matsubara sum:    ``F = T/2 trace_log(0) + T sum_{n>=1} trace_log(2 pi T L n)``
* classical limit:  ``F0 = trace_log(0) / 2``

Every quantity here is evaluated with one truncation ``l_max`` for all
frequencies involved, so differences such as ``F - E0`` are not polluted by
truncation changes between nodes.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DomainError, FitIllConditioned, NonConvergence
from .materials import MaterialModel
from .roundtrip import (Geometry, block_log_dets, default_l_max, frequency_tables,
                        zero_block_log_dets)


class LowTemperatureWarning(UserWarning):
    """Raised (as a warning) when a low-temperature formula is used at ``T L >= 0.1``."""


@dataclass(frozen=True)
class NumericsConfig:
    rel_tol: float = 1e-8
    l_max_override: Optional[int] = None
    quad_panels: int = 8
    matsubara_cap: int = 100_000
    fit_stencil_h: float = 1e-2
    fit_degree: int = 5
    l_max_cap: int = 300

    def __post_init__(self):
        if not 1e-14 < self.rel_tol < 1e-2:
            raise DomainError(f"rel_tol must lie in (1e-14, 1e-2), got {self.rel_tol}")
        if self.l_max_override is not None and self.l_max_override < 1:
            raise DomainError("l_max_override must be positive")
        for name in ("quad_panels", "matsubara_cap", "fit_degree", "l_max_cap"):
            if getattr(self, name) < 1:
                raise DomainError(f"{name} must be positive")
        if not self.fit_stencil_h > 0.0:
            raise DomainError("fit_stencil_h must be positive")
        if self.fit_degree < 3:
            raise DomainError("fit_degree must be at least 3 to expose the cubic term")


@dataclass(frozen=True)
class EnergyResult:
    value: float
    err_estimate: float
    l_max_used: int
    nodes_or_terms: int
    converged: bool


@dataclass(frozen=True)
class LowTempCoefficients:
    n1: float
    n3: float
    fit_residual: float
    stencil_h: float
    l_max_used: int = 0


# keeps one batch of balanced blocks under ~64 MB
_BATCH_BYTES = 64 * 2 ** 20


def _m_weights(l_max):
    w = np.full(l_max + 1, 2.0)
    w[0] = 1.0
    return w


def _trace_log_zero(geometry, model, l_max):
    dets = zero_block_log_dets(geometry, model, l_max)
    return math.fsum(_m_weights(l_max) * dets)


def _trace_log_positive(geometry, model, xs, l_max):
    xs = np.asarray(xs, dtype=float)
    n = 2 * l_max
    chunk = max(1, _BATCH_BYTES // (8 * n * n))
    out = np.empty(len(xs))
    w = _m_weights(l_max)
    for start in range(0, len(xs), chunk):
        sub = xs[start:start + chunk]
        tables = frequency_tables(geometry, model, sub, l_max)
        per_m = np.empty((l_max + 1, len(sub)))
        for m in range(l_max + 1):
            per_m[m] = block_log_dets(tables, m)
        # fixed-order compensated sum over m for each node
        out[start:start + chunk] = [math.fsum(w * per_m[:, i]) for i in range(len(sub))]
    return out


def trace_log_fixed(geometry: Geometry, model: MaterialModel, xs, l_max: int) -> np.ndarray:
    """``trace_log`` at each ``x >= 0`` with a fixed truncation ``l_max``."""
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    if np.any(~np.isfinite(xs)) or np.any(xs < 0.0):
        raise DomainError("frequencies must be finite and >= 0")
    out = np.empty(len(xs))
    zero = xs == 0.0
    if np.any(zero):
        out[zero] = _trace_log_zero(geometry, model, l_max)
    if np.any(~zero):
        out[~zero] = _trace_log_positive(geometry, model, xs[~zero], l_max)
    return out


def select_l_max(geometry: Geometry, model: MaterialModel, probe_xs, config: NumericsConfig,
                 tol: Optional[float] = None):
    """Smallest ``lambda`` (in steps of 2) with ``|r(lambda) - r(lambda+2)| <= tol |r(lambda)|``.

    Returns ``(l_max, rel_change)`` where ``l_max = lambda + 2`` is the value
    to use and ``rel_change`` the largest relative change seen at the probes.
    """
    if config.l_max_override is not None:
        return config.l_max_override, 0.0
    tol = config.rel_tol if tol is None else tol
    lam = default_l_max(geometry.rho)
    cap = config.l_max_cap
    prev = trace_log_fixed(geometry, model, probe_xs, lam)
    last_change = None
    while True:
        if lam + 2 > cap:
            raise NonConvergence(
                f"l_max cap {cap} reached before trace_log converged "
                f"(rho={geometry.rho}, rel_tol={tol})")
        nxt = trace_log_fixed(geometry, model, probe_xs, lam + 2)
        scale = np.maximum(np.abs(prev), 1e-300)
        change = float(np.max(np.abs(nxt - prev) / scale))
        if np.all(np.abs(nxt - prev) <= tol * np.abs(prev)):
            return lam + 2, change
        step = 2
        if last_change is not None and 0.0 < change < last_change:
            # geometric convergence in lambda: jump most of the remaining way
            needed = math.log(tol / change) / math.log(change / last_change)
            step = 2 * max(1, min(int(needed) - 1, 10))
        if step == 2:
            prev, last_change = nxt, change
            lam += 2
        else:
            lam = min(lam + step, cap - 2)
            prev, last_change = trace_log_fixed(geometry, model, probe_xs, lam), None


def trace_log(geometry: Geometry, model: MaterialModel, x: float,
              config: NumericsConfig = NumericsConfig()) -> float:
    """``Tr ln(1 - M(x))`` with ``l_max`` grown until it stops changing.

    ``x = 0`` uses the closed-form zero-frequency blocks.

    Raises
    ------
    NonPositiveDeterminant
        If any block has ``det(1 - M) <= 0``.
    NonConvergence
        If the ``l_max`` cap is reached first.
    """
    if not math.isfinite(x) or x < 0.0:
        raise DomainError(f"trace_log needs x >= 0, got {x!r}")
    l_max, _ = select_l_max(geometry, model, [x], config)
    return float(trace_log_fixed(geometry, model, [x], l_max)[0])


def _decay_rate(geometry):
    return 2.0 * (1.0 - geometry.rho)


def energy_l_max(geometry: Geometry, model: MaterialModel, config: NumericsConfig):
    """Truncation shared by the energy, the Matsubara sum and the low-``T`` fit."""
    a = _decay_rate(geometry)
    return select_l_max(geometry, model, [0.0, 1.0 / a, 4.0 / a], config, 0.5 * config.rel_tol)


def _panel_edges(n_panels, t_cut):
    if n_panels == 1:
        return np.array([0.0, t_cut])
    inner = t_cut * 2.0 ** -np.arange(n_panels - 1, -1, -1.0)
    return np.concatenate([[0.0], inner])


_MAX_GL_ORDER = 256


def casimir_energy_T0(geometry: Geometry, model: MaterialModel,
                      config: NumericsConfig = NumericsConfig()) -> EnergyResult:
    """Zero-temperature energy ``E0`` by adaptive composite Gauss-Legendre.

    The integrand decays as ``exp(-2 (1 - rho) x)``; panels are laid out in
    ``t = 2 (1 - rho) x`` on ``[0, 40]`` (geometric widths towards the tail)
    and each panel doubles its Gauss-Legendre order until the order-``n`` and
    order-``2n`` results agree.  The neglected tail ``t > 40`` is bounded from
    the last node assuming the asymptotic decay rate.
    """
    a = _decay_rate(geometry)
    t_cut = 40.0
    l_max, trunc_change = energy_l_max(geometry, model, config)
    edges = _panel_edges(config.quad_panels, t_cut)
    n_panels = len(edges) - 1
    tol = 0.5 * config.rel_tol

    def panel_integral(k, order):
        nodes, weights = np.polynomial.legendre.leggauss(order)
        lo, hi = edges[k], edges[k + 1]
        ts = 0.5 * (hi - lo) * nodes + 0.5 * (hi + lo)
        return ts, 0.5 * (hi - lo) * weights

    orders = [8] * n_panels
    coarse = [None] * n_panels
    fine = [None] * n_panels
    last_node = (None, None)
    evaluations = 0
    pending = list(range(n_panels))
    while True:
        # evaluate everything the pending panels need in one batch
        requests = []
        for k in pending:
            if coarse[k] is None:
                requests.append((k, "coarse", orders[k]))
            requests.append((k, "fine", 2 * orders[k]))
        all_ts = []
        layout = []
        for k, kind, order in requests:
            ts, ws = panel_integral(k, order)
            layout.append((k, kind, ts, ws, len(all_ts)))
            all_ts.extend(ts)
        values = trace_log_fixed(geometry, model, np.array(all_ts) / a, l_max)
        evaluations += len(all_ts)
        for k, kind, ts, ws, offset in layout:
            vals = values[offset:offset + len(ts)]
            integral = math.fsum(ws * vals) / a
            if kind == "coarse":
                coarse[k] = integral
            else:
                fine[k] = integral
            if k == n_panels - 1 and kind == "fine":
                last_node = (ts[-1], vals[-1])
        total = math.fsum(fine)
        errs = [abs(fine[k] - coarse[k]) for k in range(n_panels)]
        if math.fsum(errs) <= tol * abs(total):
            break
        pending = [k for k in range(n_panels) if errs[k] > tol * abs(total) / n_panels]
        if not pending:
            break
        for k in pending:
            if 2 * orders[k] >= _MAX_GL_ORDER:
                raise NonConvergence(
                    f"Gauss-Legendre refinement stalled on panel {k} at order {2 * orders[k]}")
            orders[k] *= 2
            coarse[k] = fine[k]
    t_last, f_last = last_node
    # int_{t_cut}^inf |f| dt/a with f ~ f_last exp(-(t - t_last)), doubled for safety
    tail = 2.0 * abs(f_last) * math.exp(-(t_cut - t_last)) / a
    pref = 1.0 / (2.0 * math.pi * geometry.L)
    value = pref * total
    quad_err = pref * (math.fsum(errs) + tail)
    err = quad_err + trunc_change * abs(value)
    converged = bool(err <= config.rel_tol * abs(value))
    return EnergyResult(float(value), float(err), int(l_max), evaluations, converged)


def free_energy(geometry: Geometry, model: MaterialModel, T: float,
                config: NumericsConfig = NumericsConfig()) -> EnergyResult:
    """Matsubara sum for the free energy at temperature ``T``.

    Terms are generated in growing batches.  The sum stops once the
    geometric bound on the remainder, built from the last term ratio, drops
    below ``rel_tol/2`` of the partial sum.
    """
    if not math.isfinite(T) or T <= 0.0:
        raise DomainError(f"temperature must be > 0, got {T!r}")
    l_max, trunc_change = energy_l_max(geometry, model, config)
    step = 2.0 * math.pi * T * geometry.L
    terms = [0.5 * T * _trace_log_zero(geometry, model, l_max)]
    tol = 0.5 * config.rel_tol
    n = 0
    batch = 8
    tail = 0.0
    done = False
    while not done:
        if n >= config.matsubara_cap:
            raise NonConvergence(f"Matsubara sum not converged after {n} terms")
        upto = min(n + batch, config.matsubara_cap)
        ns = np.arange(n + 1, upto + 1)
        vals = T * trace_log_fixed(geometry, model, ns * step, l_max)
        for v in vals:
            n += 1
            terms.append(float(v))
            partial = math.fsum(terms)
            prev = terms[-2] if n > 1 else 0.0
            if prev == 0.0 or v == 0.0:
                r = 0.0 if v == 0.0 else 1.0
            else:
                r = abs(v / prev)
            if r < 1.0:
                # terms decay geometrically from here on
                tail = abs(v) * r / (1.0 - r)
                if tail <= tol * abs(partial):
                    done = True
                    break
        batch *= 2
    value = math.fsum(terms)
    err = tail + trunc_change * abs(value)
    return EnergyResult(float(value), float(err), int(l_max), n + 1,
                        bool(err <= config.rel_tol * abs(value)))


def f0_classical_result(geometry: Geometry, model: MaterialModel,
                        config: NumericsConfig = NumericsConfig()) -> EnergyResult:
    """:func:`f0_classical` with its truncation diagnostics."""
    l_max, change = select_l_max(geometry, model, [0.0], config)
    value = 0.5 * float(trace_log_fixed(geometry, model, [0.0], l_max)[0])
    err = change * abs(value)
    return EnergyResult(value, float(err), int(l_max), l_max + 1,
                        bool(err <= config.rel_tol * abs(value)))


def f0_classical(geometry: Geometry, model: MaterialModel,
                 config: NumericsConfig = NumericsConfig()) -> float:
    """``F0 = Tr ln(1 - M(0)) / 2``, from the closed-form zero-frequency blocks."""
    return f0_classical_result(geometry, model, config).value


def _fit_odd(geometry, model, h, degree, l_max):
    xs = h * np.arange(degree + 1)
    ys = trace_log_fixed(geometry, model, xs, l_max)
    u = np.arange(degree + 1, dtype=float)
    V = np.vander(u, degree + 1, increasing=True)
    cond = np.linalg.cond(V)
    if cond > 1e12:
        raise FitIllConditioned(f"stencil Vandermonde condition number {cond:.3g}")
    coef, *_ = np.linalg.lstsq(V, ys, rcond=None)
    residual = float(np.max(np.abs(V @ coef - ys)))
    return coef / h ** np.arange(degree + 1), residual


def low_temp_coefficients(geometry: Geometry, model: MaterialModel,
                          config: NumericsConfig = NumericsConfig()) -> LowTempCoefficients:
    """Linear and cubic Taylor coefficients of ``trace_log`` at ``x = 0``.

    Polynomial fits on ``x = 0, h, ..., degree*h`` and on the half-spaced
    stencil are Richardson-combined; the leading stencil error in the
    ``x^k`` coefficient scales like ``h^(degree+1-k)``.
    """
    h = config.fit_stencil_h
    deg = config.fit_degree
    a = _decay_rate(geometry)
    if config.l_max_override is not None:
        l_max = config.l_max_override
    else:
        l_max, _ = select_l_max(geometry, model, [0.0, deg * h, 1.0 / a], config,
                                0.5 * config.rel_tol)
    c_h, res_h = _fit_odd(geometry, model, h, deg, l_max)
    c_h2, res_h2 = _fit_odd(geometry, model, 0.5 * h, deg, l_max)

    def richardson(k):
        p = deg + 1 - k
        return (2.0 ** p * c_h2[k] - c_h[k]) / (2.0 ** p - 1.0)

    return LowTempCoefficients(n1=float(richardson(1)), n3=float(richardson(3)),
                               fit_residual=max(res_h, res_h2), stencil_h=h,
                               l_max_used=int(l_max))


def low_temp_correction(geometry: Geometry, model: MaterialModel, T: float,
                        config: NumericsConfig = NumericsConfig(),
                        coefficients: Optional[LowTempCoefficients] = None) -> float:
    """Leading ``T^4`` shift ``F - E0`` of the free energy.

    With ``trace_log(x) = ... + n3 x^3 + ...`` the Euler-Maclaurin (Abel-Plana)
    difference between the Matsubara sum and the frequency integral is
    ``pi^3 T^4 L^3 n3 / 15``.  A :class:`LowTemperatureWarning` is emitted for
    ``T L >= 0.1``, where higher orders are no longer negligible.
    """
    if not math.isfinite(T) or T < 0.0:
        raise DomainError(f"temperature must be >= 0, got {T!r}")
    if T == 0.0:
        return 0.0
    if T * geometry.L >= 0.1:
        warnings.warn(f"T L = {T * geometry.L:g} is outside the low-temperature regime",
                      LowTemperatureWarning, stacklevel=2)
    coeffs = coefficients or low_temp_coefficients(geometry, model, config)
    return math.pi ** 3 * T ** 4 * geometry.L ** 3 * coeffs.n3 / 15.0
