"""Command-line front end: ``fracinv {ml-eval,forward,invert,verify}``."""
from __future__ import annotations

import argparse
import csv
import json
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__, kernels
from .config import ConfigError, ProblemConfig
from .errors import FracInvError, IncompatibleData
from .inverse import ReconstructionResult, assemble, forward, uniqueness_probe
from .multiml import FractionalOrders, MLArguments, ml_asymptotic, ml_eval_many, series_growth
from .spectral import (SpectralField, analyze, read_coefficients_csv, read_grid_csv, synthesize,
                       write_coefficients_csv, write_grid_csv)
from .verify import loglog_slope, run_suite

EXIT_UNIQUE = 0
EXIT_NON_UNIQUE = 10
EXIT_INCOMPATIBLE = 20
EXIT_NUMERICAL = 30


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    raise TypeError(f"not serialisable: {type(obj).__name__}")


def write_json(path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def write_manifest(out: Path, cfg: ProblemConfig, command: str, files) -> None:
    write_json(out / "manifest.json", {
        "command": command,
        "config_sha256": cfg.digest(),
        "versions": {"fracinv": __version__, "numpy": np.__version__, "backend": kernels.BACKEND},
        "files": sorted(files),
    })
    (out / "config.json").write_text(cfg.dumps())


def _load_config(args) -> ProblemConfig:
    cfg = ProblemConfig.load(args.config) if args.config else ProblemConfig()
    return cfg.override(cutoff=args.cutoff, t0=args.t0, seed=args.seed,
                        output_dir=str(args.out) if args.out else None)


def _out_dir(cfg: ProblemConfig) -> Path:
    out = Path(cfg.data["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _time_tag(i: int) -> str:
    return f"t{i:03d}"


def _write_times(out: Path, times) -> str:
    with open(out / "times.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "t"])
        for i, t in enumerate(times):
            w.writerow([_time_tag(i), repr(float(t))])
    return "times.csv"


def _write_field(out: Path, stem: str, fld: SpectralField, n_points: int) -> list:
    write_coefficients_csv(out / f"{stem}_coeffs.csv", fld)
    write_grid_csv(out / f"{stem}_grid.csv", synthesize(fld, n_points))
    return [f"{stem}_coeffs.csv", f"{stem}_grid.csv"]


def _field_from_spec(spec: dict, dim: int, cutoff: int, seed_offset) -> SpectralField:
    kind = spec.get("kind", "random")
    if kind == "zero":
        return SpectralField.zeros(dim, cutoff)
    if kind == "random":
        seed = spec.get("seed")
        if seed is not None and seed_offset is not None:
            seed = int(seed) + int(seed_offset)
        return SpectralField.random(dim, cutoff, seed=seed, decay=spec.get("decay", 3.0),
                                    band=spec.get("band"))
    if kind == "modes":
        return SpectralField.from_modes(dim, cutoff, {
            tuple(m["n"]): complex(m.get("re", 0.0), m.get("im", 0.0)) for m in spec["modes"]})
    if kind == "file":
        return read_field(spec["path"], cutoff)
    raise ConfigError(f"unknown field kind {kind!r}")


def read_field(path, cutoff: int) -> SpectralField:
    """Coefficient CSV (columns n1.., re, im) or grid CSV (columns x1.., value)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
    if header[-2:] == ["re", "im"]:
        return read_coefficients_csv(path, cutoff)
    return analyze(read_grid_csv(path), cutoff)


# --------------------------------------------------------------------------
# subcommands


def cmd_ml_eval(cfg: ProblemConfig, threads: int = 1) -> int:
    spec = cfg.data["ml_eval"]
    o = spec.get("orders") or cfg.data["orders"]
    orders = FractionalOrders(tuple(o["rho"]), None if o.get("q") is None else tuple(o["q"]))
    beta = float(spec["beta"])
    lo, hi = sorted([abs(spec["z1_min"]), abs(spec["z1_max"])])
    z1 = -np.logspace(np.log10(lo), np.log10(hi), int(spec["points"]))
    zrest = np.tile(np.asarray(spec["zrest"][: orders.M - 1], float), (len(z1), 1))
    policy = cfg.policy
    values, regimes, err = ml_eval_many(orders, beta, z1, zrest, policy)
    contour, _, cerr = ml_eval_many(orders, beta, z1, zrest,
                                    replace(policy, series_growth_limit=-1.0,
                                            series_fallback=False))
    # second opinion for contour points: the series wherever it still converges
    growth = series_growth(orders, z1, zrest)
    alt_ok = growth <= policy.hard_growth_limit
    series = np.full(len(z1), np.nan)
    serr = np.full(len(z1), np.nan)
    if np.any(alt_ok):
        forced = replace(policy, series_growth_limit=np.inf, hard_growth_limit=np.inf)
        sv, _, se = ml_eval_many(orders, beta, z1[alt_ok], zrest[alt_ok], forced)
        series[alt_ok], serr[alt_ok] = sv, se
    p = int(spec.get("asymptotic_order", 3))
    asym = None
    if beta > 2 * orders.rho1 and np.all(zrest < 0):
        contour_spec = policy.contour_for(orders, float(np.max(np.abs(zrest), initial=0.0)))
        asym = np.array([ml_asymptotic(orders, MLArguments(beta, (z,) + tuple(r)), p, contour_spec)
                         for z, r in zip(z1, zrest)]).real
    tol = cfg.data["tolerances"]["agreement"]
    out = _out_dir(cfg)
    failures = 0
    with open(out / "ml_eval.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["z1", "regime", "value_re", "value_im", "est_error", "reference_regime",
                    "reference_value", "cross_regime_deviation", "asymptotic_deviation"])
        for i, z in enumerate(z1):
            v = complex(values[i])
            if regimes[i] == "contour":
                ref_name, ref, ref_err = ("series", series[i], serr[i]) if alt_ok[i] else ("", np.nan, 0.0)
            else:
                ref_name, ref, ref_err = "contour", float(np.real(contour[i])), cerr[i]
            dev = abs(v - ref) / max(abs(v), 1e-300) if ref_name else np.nan
            if ref_name and dev > tol and abs(v - ref) > 10 * (err[i] + ref_err):
                failures += 1
            adev = "" if asym is None else repr(float(abs(asym[i] - contour[i])))
            w.writerow([repr(float(z)), regimes[i], repr(v.real), repr(v.imag), repr(float(err[i])),
                        ref_name, "" if not ref_name else repr(float(ref)),
                        "" if not ref_name else repr(float(dev)), adev])
    summary = {"failures": failures, "orders": list(orders.rho), "beta": beta,
               "tail_C": float(np.max(np.abs(values) * (1 + np.abs(z1))))}
    if asym is not None:
        d = np.abs(asym - contour)
        keep = (np.abs(z1) >= 1e3) & (d > 1e3 * np.finfo(float).eps * np.abs(contour))
        summary["asymptotic_order"] = p
        summary["asymptotic_slope"] = loglog_slope(np.abs(z1[keep]), d[keep]) if keep.sum() >= 3 else None
    write_json(out / "ml_eval_summary.json", summary)
    write_manifest(out, cfg, "ml-eval", ["ml_eval.csv", "ml_eval_summary.json"])
    return 1 if failures else 0


def cmd_forward(cfg: ProblemConfig, threads: int = 1) -> int:
    problem = cfg.problem()
    dim, cutoff = problem.symbol.dim, cfg.cutoff
    seed = cfg.data["seed"]
    f = _field_from_spec(cfg.data["forward"]["f"], dim, cutoff, seed)
    phi = _field_from_spec(cfg.data["forward"]["phi"], dim, cutoff, seed)
    times = cfg.times
    u = forward(problem, phi, f, times, threads=threads)
    out = _out_dir(cfg)
    n_points = cfg.grid_points
    files = [_write_times(out, times)]
    files += _write_field(out, "f", f, n_points)
    files += _write_field(out, "phi", phi, n_points)
    i0 = times.index(problem.t0)
    files += _write_field(out, "psi", SpectralField(dim, cutoff, u[i0]), n_points)
    with open(out / "norms.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "u_l2"])
        for i, t in enumerate(times):
            w.writerow([repr(float(t)), repr(float(np.linalg.norm(u[i].ravel())))])
            files += _write_field(out, f"u_{_time_tag(i)}", SpectralField(dim, cutoff, u[i]), n_points)
    files.append("norms.csv")
    write_manifest(out, cfg, "forward", files)
    return 0


def _diagnostics(result: ReconstructionResult, probe: dict | None) -> dict:
    diag = dict(result.diagnostics)
    diag["status"] = "unique" if result.unique else "non-unique"
    diag["free_coefficients"] = [{"n": list(n), "value": v}
                                 for n, v in sorted(result.free_coefficients.items())]
    if probe is not None:
        diag["uniqueness_probe"] = {k: v for k, v in probe.items()
                                    if k not in ("alternative_f", "alternative_free")}
    return diag


def cmd_invert(cfg: ProblemConfig, phi_path, psi_path, threads: int = 1) -> int:
    out = _out_dir(cfg)
    try:
        problem = cfg.problem()
        phi = read_field(phi_path, cfg.cutoff)
        psi = read_field(psi_path, cfg.cutoff)
        result = assemble(problem, phi, psi, cfg.times, cfg.free_policy, threads=threads)
        probe = uniqueness_probe(result)
        if not np.all(np.isfinite(result.f.coeffs)):
            raise FloatingPointError("non-finite reconstructed coefficients")
    except IncompatibleData as exc:
        write_json(out / "diagnostics.json", {
            "status": "incompatible", "message": str(exc),
            "modes": [{"n": list(m.n), "lambda": m.lam, "b_t0": m.b_t0,
                       "residual": abs(m.residual)} for m in exc.modes]})
        write_manifest(out, cfg, "invert", ["diagnostics.json"])
        print(f"incompatible data: {exc}", file=sys.stderr)
        return EXIT_INCOMPATIBLE
    except (FracInvError, FloatingPointError, ValueError, OSError) as exc:
        write_json(out / "diagnostics.json", {"status": "numerical-failure",
                                              "message": f"{type(exc).__name__}: {exc}"})
        write_manifest(out, cfg, "invert", ["diagnostics.json"])
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    n_points = cfg.grid_points
    files = [_write_times(out, result.t)]
    files += _write_field(out, "f", result.f, n_points)
    for i in range(len(result.t)):
        files += _write_field(out, f"u_{_time_tag(i)}", result.u_at(i), n_points)
    write_json(out / "diagnostics.json", _diagnostics(result, probe))
    files.append("diagnostics.json")
    write_manifest(out, cfg, "invert", files)
    return EXIT_UNIQUE if result.unique else EXIT_NON_UNIQUE


def cmd_verify(cfg: ProblemConfig, threads: int = 1) -> int:
    out = _out_dir(cfg)
    seed = cfg.data["seed"] or 0
    results = run_suite(cfg.orders, cfg.policy, seed, trace_path=out / "mode_trace.csv")
    write_json(out / "verify.json", {"passed": all(r["passed"] for r in results),
                                     "properties": results})
    files = ["verify.json"] + (["mode_trace.csv"] if (out / "mode_trace.csv").exists() else [])
    write_manifest(out, cfg, "verify", files)
    for r in results:
        print(f"{'PASS' if r['passed'] else 'FAIL'}  {r['name']}")
    return 0 if all(r["passed"] for r in results) else 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="problem config JSON")
    common.add_argument("--out", type=Path, help="output directory")
    common.add_argument("--cutoff", type=int, help="per-axis frequency cutoff")
    common.add_argument("--t0", type=float, help="overdetermination time")
    common.add_argument("--seed", type=int, help="seed offset for random fields")
    common.add_argument("--threads", type=int, default=1, help="worker threads for per-mode work")
    parser = argparse.ArgumentParser(prog="fracinv", description=__doc__)
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("ml-eval", parents=[common], help="sweep z1 and compare regimes")
    sub.add_parser("forward", parents=[common], help="synthesise u(., t) and psi from f, phi")
    inv = sub.add_parser("invert", parents=[common], help="reconstruct f from phi and psi")
    inv.add_argument("--phi", type=Path, required=True, help="initial-state field CSV")
    inv.add_argument("--psi", type=Path, required=True, help="state at t0 field CSV")
    sub.add_parser("verify", parents=[common], help="run the property suite")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL if args.command == "invert" else 1
    with warnings.catch_warnings():
        warnings.simplefilter("default")
        try:
            if args.command == "ml-eval":
                return cmd_ml_eval(cfg, args.threads)
            if args.command == "forward":
                return cmd_forward(cfg, args.threads)
            if args.command == "invert":
                return cmd_invert(cfg, args.phi, args.psi, args.threads)
            return cmd_verify(cfg, args.threads)
        except FracInvError as exc:
            print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_NUMERICAL if args.command == "invert" else 1


if __name__ == "__main__":
    sys.exit(main())
