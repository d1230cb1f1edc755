"""Per-mode solutions of the multi-term fractional Cauchy problem.

For one spectral mode with eigenvalue ``lam`` the scalar problem is

    sum_j q_j D^{rho_j} T(t) + lam T(t) = f g(t),   T(0) = phi,

whose solution is ``T(t) = phi * H(lam, t) + f * b(lam, t)`` with the
homogeneous factor ``H`` and the convolution denominator ``b`` defined below.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline

from . import kernels
from .errors import QuadratureDivergence
from .multiml import FractionalOrders, RegimePolicy, ml_eval_many

SIGN_PRESERVING = "sign-preserving"
SIGN_CHANGING = "sign-changing"


# --------------------------------------------------------------------------
# time profiles


@dataclass
class SourceTimeProfile:
    """The temporal factor g(t) of the separable source f(x) g(t).

    ``poly`` holds monomial coefficients (c_0, c_1, ...) when g is a
    polynomial; the denominator then has an exact closed form.
    """

    name: str
    params: dict
    func: Callable
    deriv: Callable | None
    T: float
    poly: tuple | None = None
    _samples: np.ndarray | None = field(default=None, repr=False)

    def __call__(self, t):
        return self.func(np.asarray(t, dtype=float))

    def eval(self, t):
        return self(t)

    def _grid(self):
        if self._samples is None:
            self._samples = self(np.linspace(0.0, self.T, 1024))
        return self._samples

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self._grid())))

    @property
    def min_abs(self) -> float:
        return float(np.min(np.abs(self._grid())))

    @property
    def kind(self) -> str:
        vals = self._grid()
        if self.min_abs > 1e-12 and (np.all(vals > 0) or np.all(vals < 0)):
            return SIGN_PRESERVING
        return SIGN_CHANGING

    @property
    def g0(self) -> float:
        return float(self(0.0))

    def to_spec(self) -> dict:
        return {"name": self.name, **self.params}

    # constructors -----------------------------------------------------------

    @classmethod
    def constant(cls, value: float = 1.0, T: float = 1.0):
        return cls.polynomial([value], T, name="constant", params={"value": value})

    @classmethod
    def polynomial(cls, coeffs, T: float = 1.0, *, name="polynomial", params=None):
        c = tuple(float(v) for v in coeffs)
        dc = tuple(k * c[k] for k in range(1, len(c))) or (0.0,)
        return cls(name, params if params is not None else {"coeffs": list(c)},
                   lambda t: np.polynomial.polynomial.polyval(t, c),
                   lambda t: np.polynomial.polynomial.polyval(t, dc), T, poly=c)

    @classmethod
    def exponential(cls, rate: float, scale: float = 1.0, T: float = 1.0):
        return cls("exponential", {"rate": rate, "scale": scale},
                   lambda t: scale * np.exp(rate * t),
                   lambda t: scale * rate * np.exp(rate * t), T)

    @classmethod
    def cosine(cls, omega: float, phase: float = 0.0, amplitude: float = 1.0, T: float = 1.0):
        return cls("cosine", {"omega": omega, "phase": phase, "amplitude": amplitude},
                   lambda t: amplitude * np.cos(omega * t + phase),
                   lambda t: -amplitude * omega * np.sin(omega * t + phase), T)

    @classmethod
    def tabulated(cls, t, values, T: float | None = None):
        t = np.asarray(t, float)
        values = np.asarray(values, float)
        spline = CubicSpline(t, values)
        d = spline.derivative()
        return cls("tabulated", {"t": t.tolist(), "values": values.tolist()},
                   lambda s: spline(s), lambda s: d(s), float(T if T is not None else t[-1]))

    @classmethod
    def from_spec(cls, spec: dict, T: float = 1.0):
        spec = dict(spec)
        name = spec.pop("name")
        if name == "constant":
            return cls.constant(spec.get("value", 1.0), T)
        if name == "polynomial":
            return cls.polynomial(spec["coeffs"], T)
        if name == "exponential":
            return cls.exponential(spec["rate"], spec.get("scale", 1.0), T)
        if name == "cosine":
            return cls.cosine(spec["omega"], spec.get("phase", 0.0), spec.get("amplitude", 1.0), T)
        if name == "tabulated":
            return cls.tabulated(spec["t"], spec["values"], T)
        raise ValueError(f"unknown g profile {name!r}")


# --------------------------------------------------------------------------
# Mittag-Leffler factors along a mode


def ml_star(orders: FractionalOrders, beta: float, lam: float, t, policy: RegimePolicy | None = None):
    """E_{rho',beta}(-lam t^rho_1, -q_2 t^(rho_1-rho_2), ...) for an array of t."""
    t = np.atleast_1d(np.asarray(t, float))
    z1 = -lam * np.power(t, orders.rho1)
    vals, _, _ = ml_eval_many(orders, beta, z1, orders.star(t), policy)
    return vals


def mode_homogeneous(orders: FractionalOrders, lam: float, t, policy: RegimePolicy | None = None):
    """1 - lam t^rho_1 E_{rho',rho_1+1}(-lam t^rho_1, *); equals 1 at t = 0 and for lam = 0."""
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, float))
    if np.any(t < 0):
        raise ValueError("t must be non-negative")
    out = np.ones_like(t)
    pos = t > 0
    if lam != 0 and np.any(pos):
        x = lam * np.power(t[pos], orders.rho1)
        out[pos] = 1.0 - x * ml_star(orders, orders.rho1 + 1.0, lam, t[pos], policy)
    return float(out[0]) if scalar else out


# --------------------------------------------------------------------------
# the denominator b(lam, t)


@dataclass(frozen=True)
class QuadSpec:
    """Geometrically graded Gauss-Legendre panels on [0, U] in u = xi^rho_1.

    Panels are [U r^(k+1), U r^k] for k < levels plus [0, U r^levels]. The
    error estimate compares ``n`` and ``n_check`` points per panel.
    """

    n: int = 16
    n_check: int = 10
    ratio: float = 0.5
    levels: int = 48
    rtol: float = 1e-11
    max_refine: int = 2


_RULES: dict = {}


def _graded_rule(U, n, ratio, levels):
    key = (n, ratio, levels)
    base = _RULES.get(key)
    if base is None:
        x, w = np.polynomial.legendre.leggauss(n)
        edges = np.concatenate([[0.0], ratio ** np.arange(levels, -1, -1)])
        lo, hi = edges[:-1], edges[1:]
        nodes = (0.5 * (hi - lo))[:, None] * x[None, :] + (0.5 * (hi + lo))[:, None]
        weights = (0.5 * (hi - lo))[:, None] * w[None, :]
        base = (nodes.ravel(), weights.ravel())
        _RULES[key] = base
    return U * base[0], U * base[1]


@dataclass
class BQuadrature:
    """Quadrature record for b(lam, t0): value, error estimate and the nodes used."""

    value: float
    error: float
    xi: np.ndarray
    kernel: np.ndarray
    integrand: np.ndarray
    abs_integral: float


def _kernel_at(orders, lam, u, beta, policy):
    # E_{rho',beta}(-lam u, -q_j u^((rho_1-rho_j)/rho_1)) with xi = u^(1/rho_1)
    xi = np.power(u, 1.0 / orders.rho1)
    vals, _, _ = ml_eval_many(orders, beta, -lam * u, orders.star(xi), policy)
    return xi, vals


def b_quadrature(orders: FractionalOrders, lam: float, g: SourceTimeProfile, t0: float,
                 quad: QuadSpec | None = None, policy: RegimePolicy | None = None) -> BQuadrature:
    """int_0^t0 g(t0 - xi) xi^(rho_1-1) E_{rho',rho_1}(-lam xi^rho_1, *) d xi.

    The substitution u = xi^rho_1 absorbs the endpoint singularity; the kernel
    keeps fractional powers of u near 0, so panels are graded toward u = 0.
    """
    quad = quad or QuadSpec()
    if t0 <= 0:
        raise ValueError("t0 must be positive")
    rho1 = orders.rho1
    U = t0 ** rho1
    n, n_check = quad.n, quad.n_check
    for _ in range(quad.max_refine + 1):
        u, w = _graded_rule(U, n, quad.ratio, quad.levels)
        xi, E = _kernel_at(orders, lam, u, rho1, policy)
        G = g(np.maximum(t0 - xi, 0.0)) * E / rho1
        val = float(np.dot(w, G))
        absint = float(np.dot(w, np.abs(G)))
        u2, w2 = _graded_rule(U, n_check, quad.ratio, quad.levels)
        xi2, E2 = _kernel_at(orders, lam, u2, rho1, policy)
        val2 = float(np.dot(w2, g(np.maximum(t0 - xi2, 0.0)) * E2 / rho1))
        err = abs(val - val2)
        if err <= quad.rtol * absint + 1e-300:
            return BQuadrature(val, err, xi, E * np.power(np.maximum(xi, 1e-300), rho1 - 1.0),
                               G, absint)
        n_check, n = n, 2 * n
    raise QuadratureDivergence(
        f"b quadrature for lam={lam:g}, t0={t0:g} changed by {err:.3g} "
        f"(scale {absint:.3g}) under refinement")


def b_closed_form(orders: FractionalOrders, lam: float, coeffs, t, policy: RegimePolicy | None = None):
    """Exact b(lam, t) for polynomial g(t) = sum_m c_m t^m.

    Uses int_0^t (t - xi)^m xi^(rho_1-1) E_{rho',rho_1}(.., xi) d xi
         = m! t^(rho_1+m) E_{rho',rho_1+1+m}(-lam t^rho_1, *).
    """
    scalar = np.ndim(t) == 0
    t = np.atleast_1d(np.asarray(t, float))
    out = np.zeros_like(t)
    pos = t > 0
    tp = t[pos]
    for m, c in enumerate(coeffs):
        if c == 0:
            continue
        E = ml_star(orders, orders.rho1 + 1.0 + m, lam, tp, policy)
        out[pos] += c * math.factorial(m) * np.power(tp, orders.rho1 + m) * E
    return float(out[0]) if scalar else out


def b_integration_by_parts(orders: FractionalOrders, lam: float, g: SourceTimeProfile, t0: float,
                           quad: QuadSpec | None = None, policy: RegimePolicy | None = None) -> float:
    """b via g(0) t0^rho_1 E_{rho',rho_1+1} + int g'(t0-xi) xi^rho_1 E_{rho',rho_1+1} d xi.

    Needs ``g.deriv``; an independent route for cross-checking the direct quadrature.
    """
    if g.deriv is None:
        raise ValueError("integration by parts needs the derivative of g")
    quad = quad or QuadSpec()
    rho1 = orders.rho1
    beta = rho1 + 1.0
    boundary = g.g0 * t0 ** rho1 * float(ml_star(orders, beta, lam, [t0], policy)[0])
    U = t0 ** rho1
    # xi^rho_1 d xi = (1/rho_1) u^(1/rho_1) du
    u, w = _graded_rule(U, quad.n, quad.ratio, quad.levels)
    xi, E = _kernel_at(orders, lam, u, beta, policy)
    G = g.deriv(np.maximum(t0 - xi, 0.0)) * xi * E / rho1
    return boundary + float(np.dot(w, G))


def b_coefficient(orders: FractionalOrders, lam: float, g: SourceTimeProfile, t0,
                  quad: QuadSpec | None = None, policy: RegimePolicy | None = None,
                  method: str = "auto"):
    """The denominator b(lam, t0); ``t0`` may be an array of times.

    ``method``: ``"auto"`` (closed form for polynomial g, quadrature otherwise),
    ``"closed"``, ``"quadrature"`` or ``"parts"``.
    """
    if method == "auto":
        method = "closed" if g.poly is not None else "quadrature"
    if method == "closed":
        if g.poly is None:
            raise ValueError("closed form needs a polynomial profile")
        return b_closed_form(orders, lam, g.poly, t0, policy)
    scalar = np.ndim(t0) == 0
    ts = np.atleast_1d(np.asarray(t0, float))
    out = np.zeros_like(ts)
    for i, t in enumerate(ts):
        if t <= 0:
            continue
        if method == "quadrature":
            out[i] = b_quadrature(orders, lam, g, t, quad, policy).value
        elif method == "parts":
            out[i] = b_integration_by_parts(orders, lam, g, t, quad, policy)
        else:
            raise ValueError(f"unknown method {method!r}")
    return float(out[0]) if scalar else out


def b_scaling_constants(orders: FractionalOrders, lams, g: SourceTimeProfile, t0: float,
                        policy: RegimePolicy | None = None, method: str = "auto"):
    """Fitted (C0, C1) with C0 <= lam |b(lam, t0)| <= C1 over positive ``lams``."""
    lams = np.asarray([v for v in lams if v > 0], float)
    scaled = np.array([v * abs(b_coefficient(orders, v, g, t0, policy=policy, method=method))
                       for v in lams])
    return float(scaled.min()), float(scaled.max()), scaled


# --------------------------------------------------------------------------
# mode traces and the L1 oracle


@dataclass
class ModeSolution:
    """T(t) = phi * H(lam, t) + f * b(lam, t) sampled on ``t``."""

    lam: float
    phi: complex
    f: complex
    t: np.ndarray
    trace: np.ndarray
    homogeneous: np.ndarray
    b: np.ndarray


def mode_solve(orders: FractionalOrders, lam: float, phi, f, g: SourceTimeProfile, t_grid,
               policy: RegimePolicy | None = None, quad: QuadSpec | None = None,
               method: str = "auto") -> ModeSolution:
    t = np.asarray(t_grid, float)
    if np.any(t < 0):
        raise ValueError("times must be non-negative")
    H = mode_homogeneous(orders, lam, t, policy)
    b = np.zeros_like(t) if f == 0 else np.atleast_1d(
        b_coefficient(orders, lam, g, t, quad, policy, method))
    trace = phi * H + f * b
    return ModeSolution(lam, phi, f, t, trace, np.atleast_1d(H), b)


@dataclass
class L1Residual:
    t: np.ndarray
    residual: np.ndarray
    max_abs: float
    window_start: float
    window_max: float
    dt: float


def caputo_l1(orders: FractionalOrders, values, dt: float):
    """sum_j q_j D^{rho_j} applied to samples on the uniform grid n*dt (L1 scheme)."""
    values = np.asarray(values)
    out = np.zeros(values.shape, dtype=values.dtype)
    for r, q in zip(orders.rho, orders.q):
        if np.iscomplexobj(values):
            d = (kernels.l1_caputo(values.real, dt, r)
                 + 1j * kernels.l1_caputo(values.imag, dt, r))
        else:
            d = kernels.l1_caputo(values, dt, r)
        out = out + q * d
    return out


def caputo_l1_residual(orders: FractionalOrders, sol: ModeSolution, g: SourceTimeProfile,
                       window: float = 0.5) -> L1Residual:
    """Residual of the mode equation with the L1 discretisation of each Caputo term.

    The trace must sit on a uniform grid starting at t = 0. ``max_abs`` covers
    the whole grid and is dominated by the start-up error from the t^rho_1
    behaviour at 0; ``window_max`` covers t >= window * T, where the residual
    decays like dt^(2 - rho_1).
    """
    t = sol.t
    dt = float(t[1] - t[0])
    if t[0] != 0 or not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0):
        raise ValueError("L1 residual needs a uniform grid starting at t = 0")
    res = caputo_l1(orders, sol.trace, dt) + sol.lam * sol.trace - sol.f * g(t)
    res[0] = 0.0
    start = window * t[-1]
    win = t >= start - 1e-12
    return L1Residual(t, res, float(np.max(np.abs(res[1:]))), start,
                      float(np.max(np.abs(res[win]))), dt)


def write_mode_trace_csv(path, sol: ModeSolution, residual: L1Residual | None = None) -> None:
    """Rows ``t,trace,b,residual`` (real parts); residual is blank when not supplied."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "trace", "b", "residual"])
        for i, t in enumerate(sol.t):
            r = "" if residual is None else repr(float(np.real(residual.residual[i])))
            w.writerow([repr(float(t)), repr(float(np.real(sol.trace[i]))),
                        repr(float(sol.b[i])), r])
