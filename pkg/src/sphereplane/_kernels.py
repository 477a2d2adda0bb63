"""Compiled inner loops (numba).

Nothing here validates its input; the public wrappers in ``specfun``,
``materials`` and ``roundtrip`` do that.
"""
import math

import numpy as np
from numba import njit

_LN2 = math.log(2.0)


@njit(cache=True, nogil=True)
def _s_ratio_cf(n, z):
    """``s_n(z)/s_{n-1}(z)`` by modified Lentz on its continued fraction."""
    tiny = 1e-300
    b = (2.0 * n + 1.0) / z
    f = b
    c = f
    d = 0.0
    k = 1
    while k < 100000:
        b = (2.0 * (n + k) + 1.0) / z
        d = b + d
        if d == 0.0:
            d = tiny
        c = b + 1.0 / c
        if c == 0.0:
            c = tiny
        d = 1.0 / d
        delta = c * d
        f *= delta
        if abs(delta - 1.0) < 1e-16:
            break
        k += 1
    return 1.0 / f


@njit(cache=True, nogil=True)
def riccati_tables(lmax, z):
    """Riccati-Bessel tables with ``exp(+-z)`` factored out.

    ``s_l = exp(z) * s_mant[l] * 2**s_exp[l]`` and
    ``e_l = exp(-z) * e_mant[l] * 2**e_exp[l]``; ``s_ratio[l] = s_{l+1}/s_l``
    and ``e_ratio[l] = e_{l+1}/e_l``.
    """
    s_mant = np.empty(lmax + 1)
    s_exp = np.empty(lmax + 1, dtype=np.int64)
    s_ratio = np.empty(lmax + 1)
    e_mant = np.empty(lmax + 1)
    e_exp = np.empty(lmax + 1, dtype=np.int64)
    e_ratio = np.empty(lmax + 1)

    # s_{l+1}/s_l, downward from the continued-fraction seed
    r = _s_ratio_cf(lmax + 1, z)
    s_ratio[lmax] = r
    for l in range(lmax, 0, -1):
        r = z / (2.0 * l + 1.0 + z * r)
        s_ratio[l - 1] = r
    # exp(-z) sinh z
    mant, ex = math.frexp(-0.5 * math.expm1(-2.0 * z))
    s_mant[0] = mant
    s_exp[0] = ex
    for l in range(1, lmax + 1):
        mant, ex = math.frexp(s_mant[l - 1] * s_ratio[l - 1])
        s_mant[l] = mant
        s_exp[l] = s_exp[l - 1] + ex

    q = 1.0 + 1.0 / z
    e_ratio[0] = q
    e_mant[0] = 0.5
    e_exp[0] = 1
    for l in range(1, lmax + 1):
        mant, ex = math.frexp(e_mant[l - 1] * q)
        e_mant[l] = mant
        e_exp[l] = e_exp[l - 1] + ex
        q = 1.0 / q + (2.0 * l + 1.0) / z
        e_ratio[l] = q
    return s_mant, s_exp, s_ratio, e_mant, e_exp, e_ratio


@njit(cache=True, nogil=True)
def riccati_log_tables(lmax, z):
    """``log s_l``, ``s_{l+1}/s_l``, ``log e_l``, ``e_{l+1}/e_l`` for ``l = 0..lmax``."""
    s_mant, s_exp, s_ratio, e_mant, e_exp, e_ratio = riccati_tables(lmax, z)
    log_s = np.empty(lmax + 1)
    log_e = np.empty(lmax + 1)
    for l in range(lmax + 1):
        log_s[l] = z + (math.log(s_mant[l]) + s_exp[l] * _LN2)
        log_e[l] = -z + (math.log(e_mant[l]) + e_exp[l] * _LN2)
    return log_s, s_ratio, log_e, e_ratio


@njit(cache=True, nogil=True)
def _a_coef(j, l1, l2):
    d = l1 - l2
    s = l1 + l2 + 1
    v = (j * j - d * d) * (s * s - j * j)
    if v <= 0.0:
        return 0.0
    return math.sqrt(v)


@njit(cache=True, nogil=True)
def threej_m_column(l1, l2, m, out):
    """``(l1 l2 j; m -m 0)`` for ``j = |l1-l2| .. l1+l2`` into ``out``.

    Three-term recurrence in ``j`` run forward from the bottom and backward
    from the top, joined by least squares over a small window, then fixed by
    normalisation and the sign convention at ``j = l1 + l2``.
    """
    jmin = abs(l1 - l2)
    jmax = l1 + l2
    n = jmax - jmin + 1
    if abs(m) > l1 or abs(m) > l2:
        for i in range(n):
            out[i] = 0.0
        return
    if n == 1:
        out[0] = 1.0 / math.sqrt(2.0 * jmax + 1.0)
        if (l1 - l2) % 2 != 0:
            out[0] = -out[0]
        return
    fwd = np.empty(n)
    bwd = np.empty(n)
    big = 1e150

    # forward: a(j+1) f(j+1) = 2m(2j+1) f(j) - a(j) f(j-1)
    fwd[0] = 1.0
    for i in range(0, n - 1):
        j = jmin + i
        prev = fwd[i - 1] if i > 0 else 0.0
        a_next = _a_coef(j + 1.0, l1, l2)
        val = 2.0 * m * (2.0 * j + 1.0) * fwd[i] - _a_coef(float(j), l1, l2) * prev
        fwd[i + 1] = val / a_next
        if abs(fwd[i + 1]) > big:
            for k in range(i + 2):
                fwd[k] /= big

    # backward: a(j) f(j-1) = 2m(2j+1) f(j) - a(j+1) f(j+1)
    bwd[n - 1] = 1.0
    for i in range(n - 1, 0, -1):
        j = jmin + i
        nxt = bwd[i + 1] if i < n - 1 else 0.0
        a_here = _a_coef(float(j), l1, l2)
        val = 2.0 * m * (2.0 * j + 1.0) * bwd[i] - _a_coef(j + 1.0, l1, l2) * nxt
        bwd[i - 1] = val / a_here
        if abs(bwd[i - 1]) > big:
            for k in range(i - 1, n):
                bwd[k] /= big

    # join where forward growth stops (start of the classically allowed band);
    # forward is only trusted below it, backward above
    mid = n - 1
    for i in range(1, n):
        if abs(fwd[i]) <= abs(fwd[i - 1]):
            mid = i
            break
    lo = max(0, mid - 2)
    hi = min(n - 1, mid + 2)
    num = 0.0
    den = 0.0
    for i in range(lo, hi + 1):
        num += fwd[i] * bwd[i]
        den += bwd[i] * bwd[i]
    if den == 0.0:
        scale = 0.0
    else:
        scale = num / den
    for i in range(n):
        if i < mid:
            out[i] = fwd[i]
        else:
            out[i] = bwd[i] * scale
    norm = 0.0
    for i in range(n):
        norm += (2.0 * (jmin + i) + 1.0) * out[i] * out[i]
    norm = 1.0 / math.sqrt(norm)
    if out[n - 1] < 0.0:
        norm = -norm
    if (l1 - l2) % 2 != 0:
        norm = -norm
    for i in range(n):
        out[i] *= norm


@njit(cache=True, nogil=True)
def threej_000_column(l1, l2, out):
    """``(l1 l2 j; 0 0 0)`` for ``j = |l1-l2| .. l1+l2`` (odd ``j+l1+l2`` are zero)."""
    jmin = abs(l1 - l2)
    jmax = l1 + l2
    n = jmax - jmin + 1
    for i in range(n):
        out[i] = 0.0
    out[0] = 1.0
    for i in range(2, n, 2):
        j = jmin + i - 1
        out[i] = -_a_coef(float(j), l1, l2) / _a_coef(j + 1.0, l1, l2) * out[i - 2]
    norm = 0.0
    for i in range(0, n, 2):
        norm += (2.0 * (jmin + i) + 1.0) * out[i] * out[i]
    norm = 1.0 / math.sqrt(norm)
    if out[n - 1] < 0.0:
        norm = -norm
    if (l1 - l2) % 2 != 0:
        norm = -norm
    for i in range(n):
        out[i] *= norm


@njit(cache=True, nogil=True)
def coupling_tensor(m, lmin, lmax):
    """Translation couplings for one magnetic number.

    Returns ``H[i, ip, k]`` and ``HL[i, ip, k] = H * Lambda`` for
    ``l = lmin + i``, ``l' = lmin + ip`` and ``l'' = l + l' - 2k``.
    """
    nl = lmax - lmin + 1
    kdim = lmax + 1
    H = np.zeros((nl, nl, kdim))
    HL = np.zeros((nl, nl, kdim))
    colm = np.empty(2 * lmax + 2)
    col0 = np.empty(2 * lmax + 2)
    for i in range(nl):
        l = lmin + i
        for ip in range(i, nl):
            lp = lmin + ip
            threej_m_column(l, lp, m, colm)
            threej_000_column(l, lp, col0)
            jmin = abs(l - lp)
            pref = math.sqrt((2.0 * l + 1.0) * (2.0 * lp + 1.0))
            norm_ll = math.sqrt(l * (l + 1.0) * lp * (lp + 1.0))
            for k in range(min(l, lp) + 1):
                j = l + lp - 2 * k
                idx = j - jmin
                h = pref * (2.0 * j + 1.0) * col0[idx] * colm[idx]
                lam = 0.5 * (j * (j + 1.0) - l * (l + 1.0) - lp * (lp + 1.0)) / norm_ll
                H[i, ip, k] = h
                H[ip, i, k] = h
                HL[i, ip, k] = h * lam
                HL[ip, i, k] = h * lam
    return H, HL


@njit(cache=True, nogil=True)
def fill_block(m, lmin, H, HL, xs, log_k, k_down, log_t, sgn_t, out):
    """Write balanced ``M`` for every frequency in ``xs`` into ``out``.

    Parameters
    ----------
    log_k : (nx, nk)
        ``log K_{n+1/2}(2x)``.
    k_down : (nx, nk)
        ``K_{n-3/2}(2x) / K_{n+1/2}(2x)`` (entries ``n < 2`` unused).
    log_t, sgn_t : (nx, 2, nl)
        Log-magnitude and sign of the row factors ``(d^TE_l, -d^TM_l)``.
    """
    nl = H.shape[0]
    nx = xs.shape[0]
    for ix in range(nx):
        x = xs[ix]
        half_pref = 0.5 * math.log(math.pi / (4.0 * x))
        for i in range(nl):
            l = lmin + i
            for ip in range(i, nl):
                lp = lmin + ip
                s = l + lp
                kmax = min(l, lp)
                acc_a = HL[i, ip, kmax]
                acc_b = H[i, ip, kmax]
                for k in range(kmax - 1, -1, -1):
                    q = k_down[ix, s - 2 * k]
                    acc_a = HL[i, ip, k] + q * acc_a
                    acc_b = H[i, ip, k] + q * acc_b
                lam_t = 2.0 * m * x / math.sqrt(l * (l + 1.0) * lp * (lp + 1.0))
                base = half_pref + log_k[ix, s]
                for p in range(2):
                    for pp in range(2):
                        if p == pp:
                            u = acc_a
                        else:
                            if m == 0:
                                out[ix, p * nl + i, pp * nl + ip] = 0.0
                                out[ix, pp * nl + ip, p * nl + i] = 0.0
                                continue
                            u = acc_b * lam_t
                        mag = math.exp(base + 0.5 * (log_t[ix, p, i] + log_t[ix, pp, ip]))
                        val = mag * u
                        out[ix, p * nl + i, pp * nl + ip] = sgn_t[ix, p, i] * val
                        out[ix, pp * nl + ip, p * nl + i] = sgn_t[ix, pp, ip] * val


@njit(cache=True, nogil=True)
def fill_zero_block(lmin, HL, log_g, log_f, sgn_f, out):
    """Balanced ``M(0)`` from the top coupling ``l'' = l + l'``.

    ``log_g[i]`` holds ``log[(rho/2)^(2l+1) / (Gamma(l+1/2) Gamma(l+3/2))]``;
    the symmetric remainder is ``sqrt(pi)/2 * H Lambda * Gamma(l+l'+1/2)``.
    """
    nl = HL.shape[0]
    for r in range(2 * nl):
        for c in range(2 * nl):
            out[r, c] = 0.0
    half_log_pi = 0.5 * math.log(math.pi) - math.log(2.0)
    for i in range(nl):
        l = lmin + i
        for ip in range(i, nl):
            lp = lmin + ip
            hl = HL[i, ip, 0]
            base = half_log_pi + math.lgamma(l + lp + 0.5) + 0.5 * (log_g[i] + log_g[ip])
            for p in range(2):
                mag = math.exp(base + 0.5 * (log_f[p, i] + log_f[p, ip]))
                val = mag * hl
                out[p * nl + i, p * nl + ip] = sgn_f[p, i] * val
                out[p * nl + ip, p * nl + i] = sgn_f[p, ip] * val
