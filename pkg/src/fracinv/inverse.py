"""Recovery of the spatial source f(x) from the state at an interior time t0.

Each Fourier mode n with eigenvalue lam = A(n) satisfies

    u_n(t0) = phi_n H(lam, t0) + f_n b(lam, t0),

so f_n = (psi_n - phi_n H) / b whenever b does not vanish. Modes with b = 0
are degenerate: the data must then satisfy psi_n = phi_n H, and f_n is free.
"""
from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .errors import IncompatibleData, SmoothnessViolation, SmoothnessWarning
from .fracode import QuadSpec, SourceTimeProfile, b_coefficient, mode_homogeneous
from .multiml import FractionalOrders, RegimePolicy
from .spectral import EllipticSymbol, SpectralField, mode_list, sobolev_norm

REGULAR = "regular"
DEGENERATE = "degenerate"


@dataclass(frozen=True)
class ModeClassification:
    """Regular/degenerate verdict for one mode.

    ``scaled`` is lam |b| for lam > 0 and |b| for lam = 0; it is compared with
    ``threshold_used``.
    """

    n: tuple
    lam: float
    b_t0: float
    status: str
    threshold_used: float
    scaled: float

    def to_dict(self) -> dict:
        return {"n": list(self.n), "lambda": self.lam, "b_t0": self.b_t0,
                "status": self.status, "threshold": self.threshold_used,
                "scaled": self.scaled}


@dataclass(frozen=True)
class DegenerateMode:
    """Marker returned for a mode whose denominator is numerically zero.

    ``residual`` is psi_n - phi_n H(lam, t0), which must vanish for a solution
    to exist.
    """

    lam: float
    b_t0: float
    phi: complex
    psi: complex
    homogeneous: float
    residual: complex
    n: tuple = ()


@dataclass(frozen=True)
class FreeCoefficientPolicy:
    """Values assigned to f_n on degenerate modes; ``default`` unless listed in ``values``."""

    default: complex = 0.0
    values: tuple = ()

    @classmethod
    def constant(cls, value: complex) -> "FreeCoefficientPolicy":
        return cls(default=value)

    @classmethod
    def from_mapping(cls, mapping: dict, default: complex = 0.0) -> "FreeCoefficientPolicy":
        return cls(default, tuple(sorted((tuple(k), v) for k, v in mapping.items())))

    def value_for(self, n) -> complex:
        for key, v in self.values:
            if key == tuple(n):
                return v
        return self.default


def degeneracy_scale(lam: float, b: float) -> float:
    return abs(b) * lam if lam > 0 else abs(b)


def zero_mode_threshold(g: SourceTimeProfile, t0: float, rho1: float) -> float:
    return 1e-12 * g.norm * t0 ** rho1


def compatibility_tolerance(phi, psi, rtol: float = 1e-8, atol: float = 1e-14) -> float:
    return rtol * (abs(psi) + abs(phi) + atol)


def reconstruct_mode(orders: FractionalOrders, lam: float, phi_n, psi_n, g: SourceTimeProfile,
                     t0: float, *, threshold: float | None = None, eps_deg: float = 1e-8,
                     b_t0: float | None = None, homogeneous: float | None = None,
                     policy: RegimePolicy | None = None, quad: QuadSpec | None = None,
                     method: str = "auto"):
    """f_n for one mode, or a :class:`DegenerateMode` marker.

    Without an explicit ``threshold`` a positive-lam mode is degenerate when
    lam |b| < eps_deg * max|g| (the natural size of lam b for large lam), and
    the lam = 0 mode when |b| < 1e-12 max|g| t0^rho_1.
    """
    if not 0 < t0:
        raise ValueError("t0 must be positive")
    if b_t0 is None:
        b_t0 = float(b_coefficient(orders, lam, g, t0, quad, policy, method))
    if homogeneous is None:
        homogeneous = float(mode_homogeneous(orders, lam, t0, policy))
    if threshold is None:
        threshold = eps_deg * g.norm if lam > 0 else zero_mode_threshold(g, t0, orders.rho1)
    residual = psi_n - phi_n * homogeneous
    if degeneracy_scale(lam, b_t0) < threshold:
        return DegenerateMode(lam, b_t0, phi_n, psi_n, homogeneous, residual)
    return residual / b_t0


def check_compatibility(mode: DegenerateMode, tol: float | None = None,
                        free_value: complex = 0.0, rtol: float = 1e-8):
    """Return the free value for a compatible degenerate mode, else raise IncompatibleData."""
    if tol is None:
        tol = compatibility_tolerance(mode.phi, mode.psi, rtol)
    if abs(mode.residual) <= tol:
        return free_value
    raise IncompatibleData(
        f"mode {mode.n or ''} lam={mode.lam:g}: |psi - phi H| = {abs(mode.residual):.3e} "
        f"exceeds {tol:.3e}", [mode])


# --------------------------------------------------------------------------
# problem-level assembly


@dataclass
class InverseProblem:
    """Everything except the data fields: equation, symbol, time profile and tolerances.

    ``smoothness`` is ``"warn"``, ``"error"`` or ``"off"`` and controls the
    Sobolev check of phi and psi at exponent tau + m.
    """

    orders: FractionalOrders
    symbol: EllipticSymbol
    g: SourceTimeProfile
    t0: float
    T: float = 1.0
    eps_deg: float = 1e-8
    compat_rtol: float = 1e-8
    compat_atol: float = 1e-14
    tau: float | None = None
    smoothness: str = "warn"
    smoothness_tail: float = 0.25
    policy: RegimePolicy | None = None
    quad: QuadSpec | None = None
    method: str = "auto"

    def __post_init__(self):
        if not 0 < self.t0 <= self.T:
            raise ValueError("need 0 < t0 <= T")
        if self.tau is None:
            self.tau = self.symbol.dim / 2 + 0.5
        if self.smoothness not in ("warn", "error", "off"):
            raise ValueError("smoothness must be 'warn', 'error' or 'off'")


@dataclass
class ModeTable:
    """Per-eigenvalue quantities shared by every mode with the same lam."""

    lams: np.ndarray
    b_t0: np.ndarray
    homogeneous_t0: np.ndarray


def _eval_lam(problem: InverseProblem, lam: float):
    b = float(b_coefficient(problem.orders, lam, problem.g, problem.t0,
                            problem.quad, problem.policy, problem.method))
    h = float(mode_homogeneous(problem.orders, lam, problem.t0, problem.policy))
    return b, h


def _map(fn, items, threads):
    if threads and threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def mode_table(problem: InverseProblem, cutoff: int, threads: int = 1) -> ModeTable:
    """b(lam, t0) and H(lam, t0) for each distinct eigenvalue up to ``cutoff``."""
    lams = np.unique([lam for _, lam in mode_list(problem.symbol, cutoff)])
    res = _map(lambda v: _eval_lam(problem, float(v)), list(lams), threads)
    return ModeTable(lams, np.array([r[0] for r in res]), np.array([r[1] for r in res]))


def _lam_grid(problem: InverseProblem, like: SpectralField) -> np.ndarray:
    return problem.symbol.evaluate(like.n_vectors())


def _lookup(table: ModeTable, lam_grid: np.ndarray):
    idx = np.searchsorted(table.lams, lam_grid)
    idx = np.clip(idx, 0, len(table.lams) - 1)
    if not np.allclose(table.lams[idx], lam_grid, rtol=1e-13, atol=0):
        raise ValueError("mode table does not cover the field's eigenvalues")
    return idx


def classify(problem: InverseProblem, table: ModeTable, cutoff: int):
    """ModeClassification for every mode in mode_list order."""
    lams, b = table.lams, table.b_t0
    scaled = np.array([degeneracy_scale(v, x) for v, x in zip(lams, b)])
    pos = lams > 0
    median = float(np.median(scaled[pos])) if np.any(pos) else 0.0
    thr_pos = problem.eps_deg * median
    thr_zero = zero_mode_threshold(problem.g, problem.t0, problem.orders.rho1)
    out = []
    index = {float(v): i for i, v in enumerate(lams)}
    for n, lam in mode_list(problem.symbol, cutoff):
        i = index.get(lam)
        if i is None:
            raise ValueError(f"mode table does not cover lambda={lam:g}")
        thr = thr_pos if lam > 0 else thr_zero
        status = DEGENERATE if scaled[i] < thr else REGULAR
        out.append(ModeClassification(tuple(n), lam, float(b[i]), status, thr, float(scaled[i])))
    return out, median


@dataclass
class ReconstructionResult:
    """Recovered source, state trajectory and diagnostics.

    ``u`` has shape (len(t),) + f.coeffs.shape; ``u_at(i)`` wraps a slice as a
    SpectralField.
    """

    problem: InverseProblem
    phi: SpectralField
    psi: SpectralField
    f: SpectralField
    t: np.ndarray
    u: np.ndarray
    classifications: list
    degenerate_modes: list
    free_coefficients: dict
    table: ModeTable
    diagnostics: dict = field(default_factory=dict)

    def u_at(self, i: int) -> SpectralField:
        return SpectralField(self.f.dim, self.f.cutoff, self.u[i])

    @property
    def unique(self) -> bool:
        return not self.degenerate_modes


def forward(problem: InverseProblem, phi: SpectralField, f: SpectralField, t_grid,
            table: ModeTable | None = None, threads: int = 1) -> np.ndarray:
    """u_n(t) = phi_n H(lam_n, t) + f_n b(lam_n, t) on ``t_grid``; shape (len(t),) + coeffs.shape."""
    t = np.atleast_1d(np.asarray(t_grid, float))
    if phi.cutoff != f.cutoff or phi.dim != f.dim:
        raise ValueError("phi and f must share dimension and cutoff")
    lam_grid = _lam_grid(problem, phi)
    lams = np.unique(lam_grid)

    def one(lam):
        H = np.atleast_1d(mode_homogeneous(problem.orders, float(lam), t, problem.policy))
        b = np.atleast_1d(b_coefficient(problem.orders, float(lam), problem.g, t,
                                        problem.quad, problem.policy, problem.method))
        return H, b

    res = _map(one, list(lams), threads)
    H = np.array([r[0] for r in res])
    B = np.array([r[1] for r in res])
    idx = np.searchsorted(lams, lam_grid)
    # (len(t),) + grid shape
    Hg = np.moveaxis(H[idx], -1, 0)
    Bg = np.moveaxis(B[idx], -1, 0)
    return phi.coeffs[None] * Hg + f.coeffs[None] * Bg


def _tail_fraction(fld: SpectralField, a: float) -> float:
    """Share of the weighted L2^a energy carried by the outer half of the frequency box."""
    n = fld.n_vectors()
    w = (1.0 + np.sum(n ** 2, axis=-1)) ** a * np.abs(fld.coeffs) ** 2
    total = float(w.sum())
    if total == 0:
        return 0.0
    outer = np.max(np.abs(n), axis=-1) > fld.cutoff / 2
    return float(w[outer].sum() / total)


def _smoothness(problem: InverseProblem, phi, psi):
    a = problem.tau + problem.symbol.order
    report = {"tau": problem.tau, "exponent": a,
              "phi_norm": sobolev_norm(phi, a), "psi_norm": sobolev_norm(psi, a),
              "phi_tail_fraction": _tail_fraction(phi, a),
              "psi_tail_fraction": _tail_fraction(psi, a)}
    problems = []
    if problem.tau <= problem.symbol.dim / 2:
        problems.append(f"tau={problem.tau} does not exceed N/2={problem.symbol.dim / 2}")
    for name in ("phi", "psi"):
        frac = report[f"{name}_tail_fraction"]
        if frac > problem.smoothness_tail and phi.cutoff >= 2:
            problems.append(f"{name} carries {frac:.2f} of its L2^{a:g} energy in the outer "
                            f"half of the frequency box")
    report["passed"] = not problems
    report["messages"] = problems
    if problems and problem.smoothness == "error":
        raise SmoothnessViolation("; ".join(problems))
    if problems and problem.smoothness == "warn":
        warnings.warn("; ".join(problems), SmoothnessWarning, stacklevel=3)
    return report


def _linear_fit(x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    if len(x) < 2:
        return float("nan"), float("nan"), float("nan")
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), r2


def _solve_coefficients(problem, phi, psi, table, classes, free):
    idx = _lookup(table, _lam_grid(problem, phi))
    b = table.b_t0[idx]
    H = table.homogeneous_t0[idx]
    residual = psi.coeffs - phi.coeffs * H
    f = np.zeros_like(phi.coeffs)
    degenerate, incompatible, chosen = [], [], {}
    for c in classes:
        pos = tuple(np.asarray(c.n) + phi.cutoff)
        if c.status == REGULAR:
            f[pos] = residual[pos] / b[pos]
            continue
        marker = DegenerateMode(c.lam, c.b_t0, complex(phi.coeffs[pos]), complex(psi.coeffs[pos]),
                                float(H[pos]), complex(residual[pos]), c.n)
        tol = compatibility_tolerance(marker.phi, marker.psi, problem.compat_rtol, problem.compat_atol)
        try:
            f[pos] = check_compatibility(marker, tol, free.value_for(c.n))
        except IncompatibleData:
            incompatible.append(marker)
            continue
        degenerate.append(c)
        chosen[c.n] = complex(f[pos])
    return f, degenerate, incompatible, chosen


def assemble(problem: InverseProblem, phi: SpectralField, psi: SpectralField, t_grid=None,
             free: FreeCoefficientPolicy | None = None, threads: int = 1,
             table: ModeTable | None = None) -> ReconstructionResult:
    """Reconstruct f from (phi, psi) and evolve u on ``t_grid`` (default: [0, t0, T])."""
    if phi.cutoff != psi.cutoff or phi.dim != psi.dim or phi.dim != problem.symbol.dim:
        raise ValueError("phi, psi and the symbol must share dimension and cutoff")
    free = free or FreeCoefficientPolicy()
    cutoff = phi.cutoff
    smooth = _smoothness(problem, phi, psi) if problem.smoothness != "off" else {"passed": True}
    if table is None:
        table = mode_table(problem, cutoff, threads)
    classes, median = classify(problem, table, cutoff)
    coeffs, degenerate, incompatible, chosen = _solve_coefficients(
        problem, phi, psi, table, classes, free)
    if incompatible:
        raise IncompatibleData(
            f"{len(incompatible)} degenerate mode(s) violate the solvability condition",
            incompatible)
    f = SpectralField(phi.dim, cutoff, coeffs)

    t = np.asarray([0.0, problem.t0, problem.T] if t_grid is None else t_grid, float)
    u = forward(problem, phi, f, t, threads=threads)
    u_t0 = forward(problem, phi, f, [problem.t0], threads=threads)[0]
    psi_norm = psi.l2()
    over = float(np.sqrt(np.sum(np.abs(u_t0 - psi.coeffs) ** 2)))
    u_0 = forward(problem, phi, f, [0.0], threads=threads)[0]
    init = float(np.sqrt(np.sum(np.abs(u_0 - phi.coeffs) ** 2)))

    pos = table.lams > 0
    amp = 1.0 / np.abs(table.b_t0)
    slope, intercept, r2 = _linear_fit(table.lams[pos & np.isfinite(amp)],
                                       amp[pos & np.isfinite(amp)])
    near = [c.to_dict() for c in classes
            if c.threshold_used > 0 and c.threshold_used / 100 <= c.scaled <= c.threshold_used * 100]
    diagnostics = {
        "overdetermination_residual": over,
        "overdetermination_relative": over / psi_norm if psi_norm > 0 else over,
        "initial_residual": init,
        "degenerate_modes": [c.to_dict() for c in degenerate],
        "near_degenerate_modes": near,
        "median_scaled_b": median,
        "smoothness": smooth,
        "amplification": {"lambda": table.lams.tolist(), "factor": amp.tolist(),
                          "slope": slope, "intercept": intercept, "r2": r2},
        "sandwich": sandwich_report(problem, table),
        "f_l2": f.l2(),
    }
    return ReconstructionResult(problem, phi, psi, f, t, u, classes, degenerate, chosen,
                                table, diagnostics)


def sandwich_report(problem: InverseProblem, table: ModeTable, top_fraction: float = 0.1) -> dict:
    """Measured range of lam |b(lam, t0)| over the top decade of the spectrum.

    For sign-changing g this is the empirical stand-in for the small-t0
    condition: the ratio stays bounded and lam b approaches g(0) + g'(.) t0.
    """
    lams, b = table.lams, table.b_t0
    pos = lams > 0
    if not np.any(pos):
        return {"available": False}
    top = pos & (lams >= top_fraction * lams.max())
    scaled = lams[top] * np.abs(b[top])
    lo, hi = float(scaled.min()), float(scaled.max())
    same_sign = bool(np.all(b[top] > 0) or np.all(b[top] < 0))
    return {"available": True, "kind": problem.g.kind, "lambda_min": float(lams[top].min()),
            "C0": lo, "C1": hi, "ratio": hi / lo if lo > 0 else math.inf,
            "same_sign": same_sign, "g0": problem.g.g0,
            "holds": bool(lo > 0 and same_sign and hi / lo < 10)}


def uniqueness_probe(result: ReconstructionResult, alternative: FreeCoefficientPolicy | None = None,
                     rtol: float = 1e-9) -> dict:
    """Re-solve with a second free-coefficient policy and compare.

    With no degenerate modes the two coefficient sets must be bitwise equal.
    Otherwise both solutions are pushed through the forward map and their
    overdetermination and initial residuals are checked.
    """
    problem = result.problem
    alternative = alternative or FreeCoefficientPolicy.constant(1.0)
    classes = result.classifications
    coeffs, _, incompatible, chosen = _solve_coefficients(
        problem, result.phi, result.psi, result.table, classes, alternative)
    if incompatible:
        raise IncompatibleData("data became incompatible on re-solve", incompatible)
    other = SpectralField(result.f.dim, result.f.cutoff, coeffs)
    psi_norm = max(result.psi.l2(), 1e-300)
    checks = []
    for fld in (result.f, other):
        u_t0 = forward(problem, result.phi, fld, [problem.t0])[0]
        u_0 = forward(problem, result.phi, fld, [0.0])[0]
        checks.append({
            "overdetermination": float(np.linalg.norm((u_t0 - result.psi.coeffs).ravel())) / psi_norm,
            "initial": float(np.linalg.norm((u_0 - result.phi.coeffs).ravel())),
        })
    identical = bool(np.array_equal(result.f.coeffs, other.coeffs))
    valid = all(c["overdetermination"] < rtol and c["initial"] < rtol * max(result.phi.l2(), 1.0)
                for c in checks)
    diff = float(np.linalg.norm((result.f.coeffs - other.coeffs).ravel()))
    return {
        "degenerate": [list(c.n) for c in result.degenerate_modes],
        "identical": identical,
        "difference_l2": diff,
        "both_valid": valid,
        "residuals": checks,
        "unique": not result.degenerate_modes and identical,
        "non_unique_witnessed": bool(result.degenerate_modes) and valid and not identical,
        "alternative_f": other,
        "alternative_free": chosen,
    }


# --------------------------------------------------------------------------
# constructing a degenerate mode


def degenerate_cosine_profile(orders: FractionalOrders, lam: float, t0: float,
                              omega_range=(0.5, 30.0), n_scan: int = 120, T: float | None = None,
                              policy: RegimePolicy | None = None, xtol: float = 1e-14):
    """g(t) = cos(omega t) with b(lam, t0) = 0, located by a scan plus Brent's method.

    Returns (profile, omega). Raises ValueError if no sign change is found.
    """
    T = t0 if T is None else T

    def b_of(omega):
        g = SourceTimeProfile.cosine(omega, T=T)
        return float(b_coefficient(orders, lam, g, t0, policy=policy, method="quadrature"))

    grid = np.linspace(omega_range[0], omega_range[1], n_scan)
    prev_w, prev_b = grid[0], b_of(grid[0])
    for w in grid[1:]:
        cur = b_of(w)
        if prev_b == 0:
            return SourceTimeProfile.cosine(prev_w, T=T), float(prev_w)
        if np.sign(cur) != np.sign(prev_b):
            omega = brentq(b_of, prev_w, w, xtol=xtol, rtol=4 * np.finfo(float).eps)
            return SourceTimeProfile.cosine(omega, T=T), float(omega)
        prev_w, prev_b = w, cur
    raise ValueError(f"b(lam={lam:g}, t0={t0:g}) keeps its sign for omega in {omega_range}")
