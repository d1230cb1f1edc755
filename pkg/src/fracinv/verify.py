"""Property checks with measured constants, run by ``fracinv verify``."""
from __future__ import annotations

import math
import time

import mpmath
import numpy as np
from scipy.special import erfcx

from .errors import FracInvError
from .fracode import (SourceTimeProfile, b_coefficient, b_quadrature, b_scaling_constants,
                      caputo_l1_residual, ml_star, mode_solve, write_mode_trace_csv)
from .inverse import InverseProblem, assemble, forward
from .multiml import (ContourSpec, FractionalOrders, MLArguments, RegimePolicy, ml_asymptotic,
                      ml_contour, ml_eval_many, series_growth)
from .spectral import EllipticSymbol, SpectralField, analyze, mode_list, synthesize


def loglog_slope(x, y) -> float:
    return float(np.polyfit(np.log(np.asarray(x, float)), np.log(np.asarray(y, float)), 1)[0])


def observed_orders(errors, ratio: float = 2.0):
    e = np.asarray(errors, float)
    return [float(v) for v in np.log(e[:-1] / e[1:]) / math.log(ratio)]


def tail_slopes(orders: FractionalOrders, beta: float, zrest, ps, z1_values, dps: int = 40):
    """Slopes of log|asymptotic_p - contour| against log|z_1| in extended precision."""
    zrest = tuple(zrest)
    contour = ContourSpec.for_orders(orders, max((abs(v) for v in zrest), default=0.0), dps=dps)
    reference = [ml_contour(orders, MLArguments(beta, (z,) + zrest), contour) for z in z1_values]
    out = {}
    with mpmath.workdps(dps):
        for p in ps:
            diffs = [abs(ml_asymptotic(orders, MLArguments(beta, (z,) + zrest), p, contour) - ref)
                     for z, ref in zip(z1_values, reference)]
            out[p] = loglog_slope(np.abs(z1_values), [float(d) for d in diffs])
    return out


def agreement_sample(orders: FractionalOrders, n: int, seed: int, growth_limit: float = 6.0):
    """Random (beta, z_1, z_rest) in the zone where both series and contour apply."""
    rng = np.random.default_rng(seed)
    betas, z1s, rests = [], [], []
    while len(betas) < n:
        beta = rng.uniform(0.3, 2.5)
        mag = 10 ** rng.uniform(-1, 1.5)
        angle = rng.uniform(0.92, 1.0) * math.pi * rng.choice([-1, 1])
        z1 = mag * np.exp(1j * angle)
        rest = -rng.uniform(0.05, 2.0, size=orders.M - 1)
        if series_growth(orders, np.array([z1]), rest[None, :])[0] > growth_limit:
            continue
        betas.append(beta)
        z1s.append(z1)
        rests.append(rest)
    return np.array(betas), np.array(z1s), np.array(rests).reshape(n, orders.M - 1)


def regime_agreement(orders: FractionalOrders, n: int = 200, seed: int = 0, rtol: float = 1e-7):
    betas, z1s, rests = agreement_sample(orders, n, seed)
    series = RegimePolicy(series_growth_limit=1e9, hard_growth_limit=1e9)
    contour = RegimePolicy(series_growth_limit=-1.0, series_fallback=False)
    rel, explained = [], []
    for beta, z1, rest in zip(betas, z1s, rests):
        s, _, se = ml_eval_many(orders, beta, [z1], rest[None, :], series)
        c, _, ce = ml_eval_many(orders, beta, [z1], rest[None, :], contour)
        d = abs(s[0] - c[0])
        r = d / abs(s[0]) if s[0] != 0 else d
        rel.append(r)
        explained.append(r < rtol or d <= 10 * (se[0] + ce[0]))
    rel = np.array(rel)
    ok = float(np.mean(rel < rtol))
    return {"fraction_within": ok, "max_rel": float(rel.max()),
            "unexplained": int(np.sum(~np.array(explained))), "rel": rel}


def classical_identities():
    x = np.linspace(0.0, 5.0, 101)
    exp_err = np.abs(ml_eval_many(FractionalOrders((1.0,)), 1.0, x)[0] - np.exp(x)) / np.exp(x)
    erf_val = ml_eval_many(FractionalOrders((0.5,)), 1.0, -x)[0]
    erf_err = np.abs(erf_val - erfcx(x)) / erfcx(x)
    return {"exp_max_rel": float(exp_err.max()), "erfcx_max_rel": float(erf_err.max())}


def derivative_identity(orders: FractionalOrders, lam: float, t: float = 0.5, h0: float = 1e-2,
                        rungs: int = 3, policy: RegimePolicy | None = None):
    """Central differences of t^rho E_{rho',rho+1} against t^(rho-1) E_{rho',rho}."""
    rho = orders.rho1

    def F(s):
        s = np.atleast_1d(s)
        return np.power(s, rho) * ml_star(orders, rho + 1.0, lam, s, policy)

    exact = t ** (rho - 1) * float(ml_star(orders, rho, lam, [t], policy)[0])
    errs = []
    for k in range(rungs):
        h = h0 / 2 ** k
        fd = (F(t + h)[0] - F(t - h)[0]) / (2 * h)
        errs.append(abs(fd - exact))
    return {"errors": errs, "orders": observed_orders(errs)}


def positivity_and_sandwich(orders: FractionalOrders, cutoff: int = 16, t0: float = 0.5):
    g = SourceTimeProfile.constant(1.0)
    lams = sorted({lam for _, lam in mode_list(EllipticSymbol.laplacian(1), cutoff) if lam > 0})
    min_integrand = min(float(b_quadrature(orders, lam, g, t0).integrand.min()) for lam in lams)
    C0, C1, _ = b_scaling_constants(orders, lams, g, t0)
    return {"min_integrand": min_integrand, "C0": C0, "C1": C1, "ratio": C1 / C0}


def limit_check(orders: FractionalOrders, cutoff: int = 64, t0: float = 0.05):
    g = SourceTimeProfile.polynomial([1.0, -2.0])
    lams = np.arange(1, cutoff + 1, dtype=float) ** 2
    top = lams[lams >= lams.max() / 10]
    scaled = np.array([lam * b_coefficient(orders, lam, g, t0) for lam in top])
    return {"lambda_range": [float(top.min()), float(top.max())],
            "max_dev_from_g0": float(np.abs(scaled - g.g0).max()),
            "max_dev_from_g_t0": float(np.abs(scaled - g(t0)).max()), "scaled": scaled}


def l1_ladder(orders: FractionalOrders, lam: float = 4.0, T: float = 1.0, phi: float = 1.0,
              f: float = 1.0, steps=(256, 512, 1024), window: float = 0.5, trace_path=None):
    """Windowed L1 residuals on a dt-halving ladder; the finest trace goes to ``trace_path``."""
    g = SourceTimeProfile.polynomial([1.0, 1.0], T=T)
    errs = []
    for n in steps:
        t = np.linspace(0.0, T, n + 1)
        sol = mode_solve(orders, lam, phi, f, g, t)
        res = caputo_l1_residual(orders, sol, g, window)
        errs.append(res.window_max)
    if trace_path is not None:
        write_mode_trace_csv(trace_path, sol, res)
    return {"errors": errs, "orders": observed_orders(errs), "target": 2 - orders.rho1}


def transform_roundtrip(dim: int = 2, cutoff: int = 6, seed: int = 0):
    fld = SpectralField.random(dim, cutoff, seed=seed)
    n_points = 2 * cutoff + 3
    grid = synthesize(fld, n_points)
    back = analyze(grid, cutoff)
    parseval = abs(np.sum(np.abs(grid) ** 2) / n_points ** dim - np.sum(np.abs(fld.coeffs) ** 2))
    return {"roundtrip": float(np.max(np.abs(back.coeffs - fld.coeffs))),
            "parseval_rel": float(parseval / np.sum(np.abs(fld.coeffs) ** 2))}


def inverse_roundtrip(orders: FractionalOrders, dim: int = 1, cutoff: int = 32, seed: int = 0):
    problem = InverseProblem(orders, EllipticSymbol.laplacian(dim),
                             SourceTimeProfile.polynomial([1.0, 1.0]), t0=0.5, smoothness="off")
    f_true = SpectralField.random(dim, cutoff, seed=seed)
    phi = SpectralField.random(dim, cutoff, seed=seed + 1)
    psi = SpectralField(dim, cutoff, forward(problem, phi, f_true, [problem.t0])[0])
    res = assemble(problem, phi, psi)
    err = np.linalg.norm((res.f.coeffs - f_true.coeffs).ravel()) / f_true.l2()
    return {"rel_error": float(err),
            "overdetermination": res.diagnostics["overdetermination_relative"],
            "amplification_r2": res.diagnostics["amplification"]["r2"]}


def run_suite(orders: FractionalOrders, policy: RegimePolicy | None = None, seed: int = 0,
              trace_path=None):
    """Run every property; returns a list of {name, passed, measured, seconds}."""
    results = []

    def record(name, fn, judge):
        start = time.perf_counter()
        try:
            measured = fn()
            passed = bool(judge(measured))
        except (FracInvError, ValueError) as exc:
            measured, passed = {"error": f"{type(exc).__name__}: {exc}"}, False
        measured = {k: v for k, v in measured.items() if not isinstance(v, np.ndarray)}
        results.append({"name": name, "passed": passed, "measured": measured,
                        "seconds": round(time.perf_counter() - start, 3)})

    def contour_ok():
        spec = (policy or RegimePolicy()).contour_for(orders, orders.K(1.0))
        spec.validate(orders, orders.K(1.0))
        return {"R": spec.R, "theta": spec.theta, "mu": spec.mu}

    record("contour_parameters", contour_ok, lambda m: True)
    record("classical_identities", classical_identities,
           lambda m: m["exp_max_rel"] < 1e-10 and m["erfcx_max_rel"] < 1e-10)
    record("regime_agreement", lambda: regime_agreement(orders, 60, seed),
           lambda m: m["fraction_within"] >= 0.99 and m["unexplained"] == 0)
    if orders.M >= 2:
        tail_orders = FractionalOrders((0.8, 0.3), (1.0, 0.5))
        zrest = (-0.5,)
    else:
        tail_orders, zrest = FractionalOrders((0.8,)), ()
    record("asymptotic_tail", lambda: {str(k): v for k, v in tail_slopes(
        tail_orders, 1.8, zrest, (1, 2), -np.logspace(3, 6, 5), dps=30).items()},
        lambda m: all(abs(v + int(k) + 1) < 0.2 for k, v in m.items()))
    record("derivative_identity", lambda: derivative_identity(orders, 3.0),
           lambda m: all(abs(o - 2) < 0.2 for o in m["orders"]))
    record("positivity_sandwich", lambda: positivity_and_sandwich(orders),
           lambda m: m["min_integrand"] > 0 and m["ratio"] < 10)
    record("sign_changing_limit", lambda: limit_check(orders),
           lambda m: m["max_dev_from_g0"] < 0.2)
    record("l1_residual_order", lambda: l1_ladder(orders, trace_path=trace_path),
           lambda m: all(abs(o - m["target"]) < 0.15 for o in m["orders"]))
    record("transform_roundtrip", transform_roundtrip,
           lambda m: m["roundtrip"] < 1e-12 and m["parseval_rel"] < 1e-12)
    record("inverse_roundtrip", lambda: inverse_roundtrip(orders),
           lambda m: m["rel_error"] < 1e-7 and m["overdetermination"] < 1e-9
           and m["amplification_r2"] > 0.99)
    return results
