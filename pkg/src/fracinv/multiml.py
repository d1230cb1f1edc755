"""Multinomial Mittag-Leffler function E_{rho',beta}(z_1, ..., z_M).

Three evaluation regimes are provided and cross-checked by the tests:

* ``ml_series``      -- the defining multinomial double sum,
* ``ml_contour``     -- Gauss-Legendre quadrature of the contour integral
  representation over gamma(R, theta), optionally in extended precision,
* ``ml_asymptotic``  -- the large-|z_1| expansion with coefficients C_k.

``ml_eval`` and ``ml_eval_many`` dispatch between them.
"""
from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field
from functools import lru_cache
from typing import NamedTuple, Sequence

import mpmath
import numpy as np
from scipy.special import rgamma

from . import kernels
from .errors import (
    AllRegimesFailed,
    ContourViolation,
    HypothesisViolation,
    NonConvergence,
    QuadratureDivergence,
)

EPS = np.finfo(float).eps
_PANEL = 16
_GL = np.polynomial.legendre.leggauss(_PANEL)


@dataclass(frozen=True)
class FractionalOrders:
    """Orders rho_1 > ... > rho_M of the Caputo derivatives and their weights q_j.

    ``rho_1 = 1`` is accepted so that classical identities (E_{1,1} = exp)
    can be exercised; the fractional problem itself needs rho_1 < 1.
    """

    rho: tuple
    q: tuple = None

    def __post_init__(self):
        rho = tuple(float(r) for r in self.rho)
        q = tuple(float(v) for v in self.q) if self.q is not None else (1.0,) * len(rho)
        if len(rho) < 1:
            raise ValueError("need at least one order")
        if len(q) != len(rho):
            raise ValueError("rho and q must have the same length")
        if not (0.0 < rho[-1] and rho[0] <= 1.0):
            raise ValueError(f"orders must lie in (0, 1], got {rho}")
        if any(a <= b for a, b in zip(rho, rho[1:])):
            raise ValueError(f"orders must be strictly decreasing, got {rho}")
        if any(v <= 0.0 for v in q):
            raise ValueError("weights q_j must be positive")
        if q[0] != 1.0:
            raise ValueError("q_1 must equal 1")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "q", q)

    @property
    def M(self) -> int:
        return len(self.rho)

    @property
    def rho1(self) -> float:
        return self.rho[0]

    @property
    def rho_prime(self) -> np.ndarray:
        r = np.asarray(self.rho)
        return np.concatenate(([r[0]], r[0] - r[1:]))

    def star(self, t):
        """Trailing arguments ``-q_j t^(rho_1 - rho_j)``, j >= 2, for scalar or array ``t``."""
        t = np.asarray(t, dtype=float)
        r = np.asarray(self.rho)
        q = np.asarray(self.q)
        if self.M == 1:
            return np.zeros(t.shape + (0,))
        return -q[1:] * np.power(t[..., None], r[0] - r[1:])

    def K(self, T: float) -> float:
        """Bound on |z_j|, j >= 2, for the trailing arguments on (0, T]."""
        if self.M == 1:
            return 0.0
        return float(np.max(np.abs(self.star(T))))


@dataclass(frozen=True)
class MLArguments:
    """Second parameter ``beta`` and the argument tuple ``(z_1, ..., z_M)``."""

    beta: float
    z: tuple

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        object.__setattr__(self, "z", tuple(complex(v) for v in self.z))

    @property
    def z1(self) -> complex:
        return self.z[0]

    @property
    def rest(self) -> np.ndarray:
        return np.array(self.z[1:], dtype=complex)

    @property
    def is_real(self) -> bool:
        return all(v.imag == 0.0 for v in self.z)


def _root_scale(orders: FractionalOrders, z1, zrest):
    """Largest root s* of s = |z1| + sum |z_j| s^(rho_j/rho_1) (vectorised)."""
    a1 = np.abs(np.asarray(z1, dtype=complex))
    ar = np.abs(np.asarray(zrest, dtype=complex)).reshape(a1.shape + (orders.M - 1,))
    if orders.M == 1:
        return a1
    ex = np.asarray(orders.rho[1:]) / orders.rho1
    s = a1 + ar.sum(axis=-1) + 1.0
    for _ in range(200):
        s_new = a1 + (ar * np.power(s[..., None], ex)).sum(axis=-1)
        if np.all(np.abs(s_new - s) <= 1e-12 * (1.0 + s)):
            s = s_new
            break
        s = s_new
    return s


def series_growth(orders: FractionalOrders, z1, zrest=()):
    """Log of the peak series term magnitude, ~ (s*)^(1/rho_1)."""
    return np.power(_root_scale(orders, z1, zrest), 1.0 / orders.rho1)


# --------------------------------------------------------------------------
# series regime


class SeriesResult(NamedTuple):
    value: complex
    abs_sum: float
    levels: int
    est_error: float


def ml_series_info(orders: FractionalOrders, args: MLArguments, tol: float = 1e-17,
                   max_terms: int = 4000) -> SeriesResult:
    if tol <= 0:
        raise ValueError("tol must be positive")
    if len(args.z) != orders.M:
        raise ValueError("argument count does not match the number of orders")
    z = np.array(args.z, dtype=complex)
    if not np.all(np.isfinite(z)):
        raise ValueError("arguments must be finite")
    value, abs_sum, levels, ok = kernels.series_sum(z, orders.rho_prime, float(args.beta),
                                                    float(tol), int(max_terms))
    if not ok:
        raise NonConvergence(
            f"series did not settle within {max_terms} levels (|z1|={abs(args.z1):.3g}); "
            "arguments are too large for the series regime")
    if args.is_real:
        value = complex(value.real, 0.0)
    return SeriesResult(value, abs_sum, levels, 16 * EPS * abs_sum + tol)


def ml_series(orders: FractionalOrders, args: MLArguments, tol: float = 1e-17,
              max_terms: int = 4000) -> complex:
    """Truncated multinomial double sum.

    Levels k = k_1 + ... + k_M are summed in order; summation stops once two
    consecutive levels each contribute less than ``tol`` in absolute value.
    """
    return ml_series_info(orders, args, tol, max_terms).value


# --------------------------------------------------------------------------
# contour regime


@dataclass(frozen=True)
class ContourSpec:
    """The contour gamma(R, theta): arc |s| = R, |arg s| <= theta, plus two rays.

    ``dps`` switches the quadrature to mpmath at that many decimal digits.
    """

    R: float
    theta: float
    mu: float
    n_arc: int = 64
    n_ray: int = 256
    ray_cutoff: float = math.inf
    dps: int | None = None

    @classmethod
    def for_orders(cls, orders: FractionalOrders, K: float = 0.0, *, theta_frac: float = 0.7,
                   mu_frac: float = 0.9, n_arc: int = 64, n_ray: int = 256,
                   r_min_exponent: int = 1, dps: int | None = None) -> "ContourSpec":
        rho1 = orders.rho1
        theta = theta_frac * rho1 * math.pi
        mu = mu_frac * rho1 * math.pi
        i = r_min_exponent
        while True:
            R = 2.0 ** i
            if _admissible(orders, K, R):
                break
            i += 1
            if i > 60:
                raise ContourViolation(f"no admissible radius for K={K}")
        cutoff = _ray_cutoff(rho1, theta, R, dps)
        return cls(R, theta, mu, n_arc, n_ray, cutoff, dps)

    def validate(self, orders: FractionalOrders, K: float = 0.0) -> None:
        rho1 = orders.rho1
        if not (rho1 * math.pi / 2 < self.theta < self.mu < rho1 * math.pi + 1e-15):
            raise ContourViolation(
                f"need rho1*pi/2 < theta < mu < rho1*pi; got theta={self.theta:.6g}, "
                f"mu={self.mu:.6g}, rho1*pi={rho1 * math.pi:.6g}")
        if self.mu >= rho1 * math.pi and rho1 < 1.0:
            raise ContourViolation("mu must be strictly below rho1*pi")
        if math.cos(self.theta / rho1) >= 0:
            raise ContourViolation("cos(theta/rho1) must be negative for decaying rays")
        if not _admissible(orders, K, self.R):
            raise ContourViolation(
                f"radius R={self.R} violates R > K + K*sum R^(rho_j/rho_1) for K={K}")
        if self.n_arc < _PANEL or self.n_ray < _PANEL:
            raise ContourViolation("too few quadrature points")

    def refined(self) -> "ContourSpec":
        return ContourSpec(self.R, self.theta, self.mu, 2 * self.n_arc, 2 * self.n_ray,
                           self.ray_cutoff, self.dps)


def _admissible(orders, K, R):
    ex = np.asarray(orders.rho[1:]) / orders.rho1
    return R > K + K * float(np.sum(R ** ex))


def _ray_cutoff(rho1, theta, R, dps):
    # exp(r^(1/rho1) cos(theta/rho1)) below tail * exp(R^(1/rho1))
    tail = 1e-18 if dps is None else 10.0 ** (-(dps + 5))
    c = -math.cos(theta / rho1)
    return ((R ** (1.0 / rho1) - math.log(tail) + 10.0) / c) ** rho1


def _power(mag, ang, a):
    """Principal-branch power given modulus and argument."""
    return mag ** a * np.exp(1j * a * ang)


@lru_cache(maxsize=256)
def _node_set(rho, beta, R, theta, n_arc, n_ray, cutoff, half):
    """Quadrature nodes ``s``, weights ``w ds exp(s^(1/rho1)) s^((1-beta)/rho1)``, powers."""
    rho1 = rho[0]
    x, w = _GL
    segs = []  # (modulus, angle, d s / d param * weight)

    def panels(a, b, n):
        k = max(1, n // _PANEL)
        edges = np.linspace(a, b, k + 1)
        xs, ws = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            xs.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
            ws.append(0.5 * (hi - lo) * w)
        return np.concatenate(xs), np.concatenate(ws)

    if half:
        phi, wp = panels(0.0, theta, n_arc // 2)
    else:
        phi, wp = panels(-theta, theta, n_arc)
    segs.append((np.full_like(phi, R), phi, wp * 1j * R * np.exp(1j * phi)))
    r, wr = panels(R, cutoff, n_ray)
    segs.append((r, np.full_like(r, theta), wr * np.exp(1j * theta)))
    if not half:
        segs.append((r, np.full_like(r, -theta), -wr * np.exp(-1j * theta)))
    mag = np.concatenate([s[0] for s in segs])
    ang = np.concatenate([s[1] for s in segs])
    jac = np.concatenate([s[2] for s in segs])
    s = mag * np.exp(1j * ang)
    weights = jac * np.exp(_power(mag, ang, 1.0 / rho1)) * _power(mag, ang, (1.0 - beta) / rho1)
    ex = np.asarray(rho[1:]) / rho1
    powers = np.array([_power(mag, ang, e) for e in ex]).reshape(len(ex), len(s))
    return weights, s, powers


def _finish(total, rho1, half):
    if half:
        return total.imag / (rho1 * math.pi) + 0j
    return total / (2j * math.pi * rho1)


def _check_contour_args(orders, z1, zrest, contour):
    zrest = np.asarray(zrest, dtype=complex).reshape(-1)
    if np.any(zrest.imag != 0) or np.any(zrest.real > 0):
        raise ContourViolation("trailing arguments must be real and non-positive")
    K = float(np.max(np.abs(zrest))) if zrest.size else 0.0
    if contour is None:
        contour = ContourSpec.for_orders(orders, K)
    contour.validate(orders, K)
    z1 = complex(z1)
    if z1 != 0 and abs(math.atan2(z1.imag, z1.real)) < contour.mu - 1e-12:
        raise ContourViolation(f"|arg z1| must be at least mu={contour.mu:.6g}")
    return contour


def contour_batch(orders: FractionalOrders, beta: float, z1, zrest=None,
                  contour: ContourSpec | None = None, check: bool = True,
                  tol: float = 1e-9, max_refine: int = 3):
    """Contour quadrature for many argument tuples sharing ``beta``.

    Returns ``(values, est_error)``; ``est_error`` is the change under the
    last 2x refinement (zero when ``check`` is false). Arguments that have not
    settled are refined again, at most ``max_refine`` extra times.
    """
    z1 = np.atleast_1d(np.asarray(z1, dtype=complex))
    if zrest is None:
        zrest = np.zeros((len(z1), orders.M - 1), dtype=complex)
    zrest = np.asarray(zrest, dtype=complex).reshape(len(z1), orders.M - 1)
    if contour is None:
        contour = _check_contour_args(orders, 0.0, zrest, None)
    else:
        _check_contour_args(orders, 0.0, zrest, contour)
    for v in z1:
        if v != 0 and abs(math.atan2(v.imag, v.real)) < contour.mu - 1e-12:
            raise ContourViolation(f"|arg z1| must be at least mu={contour.mu:.6g}")
    real = bool(np.all(z1.imag == 0) and np.all(zrest.imag == 0))
    zs = np.concatenate([z1[:, None], zrest], axis=1)

    def run(c, idx=slice(None)):
        W, S, P = _node_set(orders.rho, float(beta), c.R, c.theta, c.n_arc, c.n_ray,
                            c.ray_cutoff, real)
        return _finish(kernels.contour_sum(W, S, P, zs[idx]), orders.rho1, real)

    vals = run(contour)
    err = np.zeros(len(z1))
    if not check:
        return vals, err
    floor = 100 * EPS * math.exp(contour.R ** (1 / orders.rho1)) / (1.0 + np.abs(z1))
    todo = np.arange(len(z1))
    coarse = vals
    for _ in range(max_refine + 1):
        contour = contour.refined()
        fine = run(contour, todo)
        change = np.abs(fine - coarse)
        vals[todo] = fine
        err[todo] = change
        bad = change > tol * np.maximum(np.abs(fine), 1e-300) + floor[todo]
        if not np.any(bad):
            return vals, err
        todo, coarse = todo[bad], fine[bad]
    i = int(todo[np.argmax(err[todo])])
    raise QuadratureDivergence(
        f"contour quadrature not converged at z1={z1[i]}: change {err[i]:.3g} "
        f"under refinement exceeds tol={tol:g}")


def _contour_mp(orders, beta, z1, zrest, contour, h=None):
    """Extended-precision contour integral of exp(s^(1/rho1)) s^((1-beta)/rho1) h(s)."""
    rho1 = mpmath.mpf(orders.rho1)
    with mpmath.workdps(contour.dps):
        beta = mpmath.mpf(beta)
        theta = mpmath.mpf(contour.theta)
        R = mpmath.mpf(contour.R)
        ex = [mpmath.mpf(r) / rho1 for r in orders.rho[1:]]
        zr = [mpmath.mpf(float(v.real)) for v in np.asarray(zrest).reshape(-1)]
        z1m = mpmath.mpc(z1)
        real = z1m.imag == 0

        def pw(mag, ang, a):
            return mag ** a * mpmath.expj(a * ang)

        def Q(mag, ang):
            return mag * mpmath.expj(ang) - mpmath.fsum(zj * pw(mag, ang, e) for zj, e in zip(zr, ex))

        def base(mag, ang):
            val = mpmath.exp(pw(mag, ang, 1 / rho1)) * pw(mag, ang, (1 - beta) / rho1)
            if h is None:
                return val / (Q(mag, ang) - z1m)
            return val * h(Q(mag, ang))

        def arc(phi):
            return base(R, phi) * 1j * R * mpmath.expj(phi)

        def ray(sign):
            return lambda r: base(r, sign * theta) * mpmath.expj(sign * theta) * sign

        stops = [R, 2 * R, 4 * R, mpmath.mpf(contour.ray_cutoff), mpmath.inf]
        stops = sorted(set(stops), key=lambda v: v if v != mpmath.inf else mpmath.mpf(10) ** 300)
        if real:
            total = mpmath.quad(arc, [0, theta / 2, theta]) + mpmath.quad(ray(1), stops)
            return mpmath.mpc(total.imag / (rho1 * mpmath.pi), 0)
        total = (mpmath.quad(arc, [-theta, 0, theta]) + mpmath.quad(ray(1), stops)
                 + mpmath.quad(ray(-1), stops))
        return total / (2j * mpmath.pi * rho1)


def ml_contour(orders: FractionalOrders, args: MLArguments, contour: ContourSpec | None = None,
               *, check: bool = True, tol: float = 1e-9):
    """Contour-integral evaluation on gamma(R, theta).

    Returns a Python complex, or an ``mpmath.mpc`` when ``contour.dps`` is set.
    """
    contour = _check_contour_args(orders, args.z1, args.rest, contour)
    if contour.dps is not None:
        return _contour_mp(orders, args.beta, args.z1, args.rest, contour)
    vals, _ = contour_batch(orders, args.beta, [args.z1], args.rest[None, :], contour,
                            check=check, tol=tol)
    return complex(vals[0])


# --------------------------------------------------------------------------
# asymptotic regime

_CK_CACHE: dict = {}
_CK_LOCK = threading.Lock()


def _ck_key(orders, beta, zrest, k, contour):
    zr = tuple(round(float(v.real), 12) for v in np.asarray(zrest).reshape(-1))
    return (orders.rho, orders.q, round(float(beta), 12), zr, k,
            contour.R, contour.theta, contour.n_arc, contour.n_ray, contour.dps)


def asymptotic_coefficient(orders: FractionalOrders, beta: float, zrest, k: int,
                           contour: ContourSpec | None = None):
    """C_k = (1/(2 rho_1 pi i)) int exp(s^(1/rho_1)) s^((1-beta)/rho_1) Q(s)^(k-1) ds.

    Independent of z_1; cached per (orders, beta, z_2..z_M) with concurrent reads.
    """
    zrest = np.asarray(zrest, dtype=complex).reshape(-1)
    contour = _check_contour_args(orders, 0.0, zrest, contour)
    key = _ck_key(orders, beta, zrest, k, contour)
    hit = _CK_CACHE.get(key)
    if hit is not None:
        return hit
    if contour.dps is not None:
        val = _contour_mp(orders, beta, 0.0, zrest, contour, h=lambda q: q ** (k - 1))
    else:
        def run(c):
            W, S, P = _node_set(orders.rho, float(beta), c.R, c.theta, c.n_arc, c.n_ray,
                                c.ray_cutoff, True)
            Q = S - (zrest.real @ P if len(zrest) else 0.0)
            return _finish(np.sum(W * Q ** (k - 1)), orders.rho1, True).real

        val = run(contour.refined())
        coarse = run(contour)
        if abs(val - coarse) > 1e-8 * max(abs(val), 1.0):
            raise QuadratureDivergence(f"C_{k} quadrature not converged")
    with _CK_LOCK:
        _CK_CACHE.setdefault(key, val)
    return _CK_CACHE[key]


def ml_asymptotic(orders: FractionalOrders, args: MLArguments, p: int,
                  contour: ContourSpec | None = None):
    """Large-|z_1| expansion truncated after the ``1/z_1^p`` term.

    Requires beta > 2 rho_1. The first two coefficients are Gamma ratios; the
    rest come from the cached contour integrals. Extended precision follows
    ``contour.dps``.
    """
    if p < 1:
        raise ValueError("p must be a positive integer")
    rho = orders.rho
    beta = args.beta
    if not beta > 2 * rho[0]:
        raise HypothesisViolation(
            f"asymptotic expansion needs beta > 2*rho_1 (beta={beta}, rho_1={rho[0]}); "
            "use the series or contour regime")
    if args.z1 == 0:
        raise HypothesisViolation("asymptotic expansion needs z1 != 0")
    zrest = args.rest
    contour = _check_contour_args(orders, args.z1, zrest, contour)
    if np.any(zrest.real == 0) and len(zrest):
        raise HypothesisViolation("trailing arguments must be strictly negative")
    if contour.dps is not None:
        with mpmath.workdps(contour.dps):
            z1 = mpmath.mpc(args.z1)
            b = mpmath.mpf(beta)
            r = [mpmath.mpf(v) for v in rho]
            zr = [mpmath.mpf(float(v.real)) for v in zrest]
            coeffs = [mpmath.rgamma(b - r[0])]
            if p >= 2:
                coeffs.append(mpmath.rgamma(b - 2 * r[0])
                              - mpmath.fsum(zj * mpmath.rgamma(b - r[0] - rj)
                                            for zj, rj in zip(zr, r[1:])))
            for k in range(3, p + 1):
                coeffs.append(asymptotic_coefficient(orders, beta, zrest, k, contour))
            return -mpmath.fsum(c / z1 ** (k + 1) for k, c in enumerate(coeffs))
    z1 = complex(args.z1)
    coeffs = [float(rgamma(beta - rho[0]))]
    if p >= 2:
        coeffs.append(float(rgamma(beta - 2 * rho[0]))
                      - sum(zj.real * float(rgamma(beta - rho[0] - rj))
                            for zj, rj in zip(zrest, rho[1:])))
    for k in range(3, p + 1):
        coeffs.append(asymptotic_coefficient(orders, beta, zrest, k, contour))
    return -sum(c / z1 ** (k + 1) for k, c in enumerate(coeffs))


# --------------------------------------------------------------------------
# dispatcher


@dataclass(frozen=True)
class RegimePolicy:
    """Regime selection and numerical settings for ``ml_eval``.

    The series is used while the estimated peak-term exponent stays below
    ``series_growth_limit`` (peak term ~ exp(limit), which bounds the
    cancellation error). ``series_threshold`` replaces that rule by a plain
    |z_1| cut when set. With ``series_fallback`` a contour value whose
    refinement estimate exceeds ``quad_tol`` is replaced by the series when the
    latter converges with a smaller error estimate.
    """

    series_growth_limit: float = 6.0
    series_threshold: float | None = None
    series_tol: float = 1e-17
    max_terms: int = 4000
    hard_growth_limit: float = 30.0
    use_asymptotic: bool = False
    asymptotic_threshold: float = 1e8
    asymptotic_order: int = 4
    theta_frac: float = 0.7
    mu_frac: float = 0.9
    n_arc: int = 64
    n_ray: int = 256
    r_min_exponent: int = 1
    quad_tol: float = 1e-9
    check_convergence: bool = True
    series_fallback: bool = True

    def contour_for(self, orders: FractionalOrders, K: float) -> ContourSpec:
        return ContourSpec.for_orders(orders, K, theta_frac=self.theta_frac, mu_frac=self.mu_frac,
                                      n_arc=self.n_arc, n_ray=self.n_ray,
                                      r_min_exponent=self.r_min_exponent)


DEFAULT_POLICY = RegimePolicy()


class MLValue(NamedTuple):
    value: complex
    regime: str
    est_error: float


def _in_sector(z1, mu):
    z1 = np.asarray(z1, dtype=complex)
    return (z1 == 0) | (np.abs(np.angle(z1)) >= mu - 1e-12)


def ml_eval_many(orders: FractionalOrders, beta: float, z1, zrest=None,
                 policy: RegimePolicy | None = None):
    """Vectorised dispatcher. Returns ``(values, regimes, est_error)``.

    Values are real when every argument is real.
    """
    policy = policy or DEFAULT_POLICY
    z1 = np.atleast_1d(np.asarray(z1, dtype=complex))
    n = len(z1)
    if zrest is None:
        zrest = np.zeros((n, orders.M - 1), dtype=complex)
    zrest = np.asarray(zrest, dtype=complex).reshape(n, orders.M - 1)
    if not (np.all(np.isfinite(z1)) and np.all(np.isfinite(zrest))):
        raise ValueError("arguments must be finite")
    real = bool(np.all(z1.imag == 0) and np.all(zrest.imag == 0))
    rest_ok = bool(np.all(zrest.imag == 0) and np.all(zrest.real <= 0))
    K = float(np.max(np.abs(zrest))) if zrest.size else 0.0
    contour = policy.contour_for(orders, K)
    contour_ok = _in_sector(z1, contour.mu) & rest_ok
    growth = series_growth(orders, z1, zrest)
    if policy.series_threshold is not None:
        use_series = np.abs(z1) <= policy.series_threshold
    else:
        use_series = growth <= policy.series_growth_limit
    use_series = use_series | ~contour_ok
    if np.any(~contour_ok & (growth > policy.hard_growth_limit)):
        raise AllRegimesFailed("arguments outside the contour sector and too large for the series")
    use_asym = np.zeros(n, dtype=bool)
    if policy.use_asymptotic and beta > 2 * orders.rho1:
        use_asym = (~use_series) & (np.abs(z1) >= policy.asymptotic_threshold) & contour_ok
        if orders.M > 1:
            use_asym &= np.all(zrest.real < 0, axis=1)

    values = np.empty(n, dtype=complex)
    err = np.zeros(n)
    regimes = np.empty(n, dtype=object)
    idx = np.flatnonzero(use_series)
    if idx.size:
        zs = np.concatenate([z1[idx, None], zrest[idx]], axis=1)
        v, a, _, ok = kernels.series_batch(zs, orders.rho_prime, float(beta),
                                           policy.series_tol, policy.max_terms)
        if not np.all(ok):
            raise NonConvergence("series did not converge for some arguments")
        values[idx] = v
        err[idx] = 16 * EPS * a
        regimes[idx] = "series"
    idx = np.flatnonzero(use_asym)
    for i in idx:
        args = MLArguments(beta, (z1[i],) + tuple(zrest[i]))
        values[i] = ml_asymptotic(orders, args, policy.asymptotic_order, contour)
        err[i] = abs(z1[i]) ** (-policy.asymptotic_order - 1)
        regimes[i] = "asymptotic"
    idx = np.flatnonzero(~use_series & ~use_asym)
    if idx.size:
        v, e = contour_batch(orders, beta, z1[idx], zrest[idx], contour,
                             check=policy.check_convergence, tol=policy.quad_tol)
        values[idx] = v
        err[idx] = e
        regimes[idx] = "contour"
        # a large radius makes the arc integrand huge; fall back on the series
        # where the contour's own estimate is poor and the series still converges
        weak = idx[(e > policy.quad_tol * np.abs(v)) & (growth[idx] <= policy.hard_growth_limit)]
        if weak.size and policy.series_fallback:
            zs = np.concatenate([z1[weak, None], zrest[weak]], axis=1)
            sv, sa, _, ok = kernels.series_batch(zs, orders.rho_prime, float(beta),
                                                 policy.series_tol, policy.max_terms)
            better = ok & (16 * EPS * sa < err[weak])
            pick = weak[better]
            values[pick] = sv[better]
            err[pick] = 16 * EPS * sa[better]
            regimes[pick] = "series"
    if real:
        return values.real.copy(), regimes, err
    return values, regimes, err


def ml_eval(orders: FractionalOrders, args: MLArguments,
            policy: RegimePolicy | None = None) -> MLValue:
    """Evaluate with automatic regime choice; the chosen regime is reported."""
    if len(args.z) != orders.M:
        raise ValueError("argument count does not match the number of orders")
    vals, regimes, err = ml_eval_many(orders, args.beta, [args.z1],
                                      args.rest[None, :] if orders.M > 1 else None, policy)
    v = vals[0]
    return MLValue(float(v) if args.is_real else complex(v), str(regimes[0]), float(err[0]))


# --------------------------------------------------------------------------
# bound diagnostics


@dataclass
class BoundReport:
    """Empirical check of |E| <= C / (1 + |z_1|) over a grid of z_1 values."""

    z1_grid: np.ndarray
    abs_values: np.ndarray
    scaled: np.ndarray
    C: float
    abs_value: float
    bound: float
    bounded: bool
    extra: dict = field(default_factory=dict)


def ml_bound_check(orders: FractionalOrders, args: MLArguments,
                   grid: Sequence[float] | None = None,
                   policy: RegimePolicy | None = None) -> BoundReport:
    """Fit C = max (1+|z_1|)|E| over a grid along the ray of ``args.z1``.

    ``bounded`` records that the scaled values have levelled off at the far
    end of the grid rather than still growing.
    """
    direction = args.z1 / abs(args.z1) if args.z1 != 0 else -1.0
    if grid is None:
        grid = np.logspace(-3, 5, 33)
    mags = np.unique(np.concatenate([np.asarray(grid, float), [abs(args.z1)]]))
    z1s = mags * direction
    rest = np.tile(args.rest, (len(z1s), 1)) if orders.M > 1 else None
    vals, _, _ = ml_eval_many(orders, args.beta, z1s, rest, policy)
    absv = np.abs(vals)
    scaled = (1.0 + mags) * absv
    C = float(np.max(scaled))
    here = float(absv[np.searchsorted(mags, abs(args.z1))])
    tail = scaled[-1] / scaled[-2]
    bounded = bool(scaled[-1] <= C and abs(tail - 1.0) < 0.1)
    return BoundReport(z1s, absv, scaled, C, here, C / (1.0 + abs(args.z1)), bounded,
                       {"tail_ratio": float(tail)})
