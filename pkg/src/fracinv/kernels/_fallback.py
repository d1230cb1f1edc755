"""Pure numpy/Python versions of the hot kernels.

Signatures and semantics match the compiled ``_core`` module exactly; the
test suite runs both against each other.
"""
import math

import numpy as np

_CHUNK = 4096


def _compositions(k, m):
    """Yield every tuple of ``m`` non-negative ints summing to ``k``."""
    if m == 1:
        yield (k,)
        return
    for first in range(k, -1, -1):
        for rest in _compositions(k - first, m - 1):
            yield (first,) + rest


def series_sum(z, rho_p, beta, tol, max_k):
    """Multinomial Mittag-Leffler double sum for one argument tuple.

    Returns ``(value, abs_sum, levels, converged)``.
    """
    z = np.asarray(z, dtype=complex)
    m = len(z)
    absz = [abs(v) for v in z]
    logz = [math.log(a) if a > 0.0 else 0.0 for a in absz]
    argz = [math.atan2(v.imag, v.real) for v in z]
    zero = [a == 0.0 for a in absz]
    lf = [0.0]

    total = 0j
    abs_sum = 0.0
    prev = math.inf
    below = 0
    for k in range(max_k + 1):
        if k > 0:
            lf.append(lf[-1] + math.log(k))
        level = 0.0
        for comp in _compositions(k, m):
            skip = False
            logmag = lf[k]
            phase = 0.0
            shift = beta
            for j in range(m):
                kj = comp[j]
                if kj:
                    if zero[j]:
                        skip = True
                        break
                    logmag += kj * logz[j] - lf[kj]
                    phase += kj * argz[j]
                    shift += rho_p[j] * kj
            if skip:
                continue
            g = math.lgamma(shift)
            mag = math.exp(logmag - g)
            # 1/Gamma(shift) is positive for shift > 0
            total += mag * complex(math.cos(phase), math.sin(phase))
            level += mag
        abs_sum += level
        if level < tol and level <= prev:
            below += 1
            if below >= 2:
                return total, abs_sum, k + 1, True
        else:
            below = 0
        prev = level
    return total, abs_sum, max_k + 1, False


def series_batch(zs, rho_p, beta, tol, max_k):
    zs = np.asarray(zs, dtype=complex)
    n = zs.shape[0]
    vals = np.empty(n, dtype=complex)
    abss = np.empty(n)
    levels = np.empty(n, dtype=np.int64)
    conv = np.empty(n, dtype=bool)
    for i in range(n):
        vals[i], abss[i], levels[i], conv[i] = series_sum(zs[i], rho_p, beta, tol, max_k)
    return vals, abss, levels, conv


def contour_sum(weights, nodes, powers, zs):
    """Sum ``w_n / (s_n - z_1 - sum_j z_j p_jn)`` over nodes for each argument row."""
    weights = np.asarray(weights, dtype=complex)
    nodes = np.asarray(nodes, dtype=complex)
    powers = np.asarray(powers, dtype=complex)
    zs = np.asarray(zs, dtype=complex)
    out = np.empty(zs.shape[0], dtype=complex)
    step = max(1, _CHUNK * 64 // max(len(nodes), 1))
    for lo in range(0, zs.shape[0], step):
        hi = min(zs.shape[0], lo + step)
        block = zs[lo:hi]
        den = nodes[None, :] - block[:, :1]
        if powers.shape[0]:
            den = den - block[:, 1:] @ powers
        out[lo:hi] = (weights[None, :] / den).sum(axis=1)
    return out


def l1_caputo(u, dt, alpha):
    """L1 approximation of the Caputo derivative on a uniform grid.

    ``out[0]`` is zero; ``out[n]`` uses values ``u[0..n]``.
    """
    u = np.asarray(u, dtype=float)
    n = len(u) - 1
    k = np.arange(n + 1, dtype=float)
    b = (k + 1.0) ** (1.0 - alpha) - k ** (1.0 - alpha)
    du = np.diff(u)
    out = np.zeros(n + 1)
    scale = dt ** (-alpha) / math.gamma(2.0 - alpha)
    for i in range(1, n + 1):
        # sum_{k=0}^{i-1} b_k (u_{i-k} - u_{i-k-1})
        out[i] = scale * np.dot(b[:i], du[i - 1::-1])
    return out
