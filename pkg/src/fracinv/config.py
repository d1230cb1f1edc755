"""Problem configuration: a single versioned JSON document."""
from __future__ import annotations

import copy
import hashlib
import json
import warnings
from dataclasses import dataclass, field

from .fracode import QuadSpec, SourceTimeProfile
from .inverse import FreeCoefficientPolicy, InverseProblem
from .multiml import FractionalOrders, RegimePolicy
from .spectral import EllipticSymbol

SCHEMA_VERSION = 1

DEFAULTS = {
    "schema_version": SCHEMA_VERSION,
    "orders": {"rho": [0.7, 0.4], "q": [1.0, 0.5]},
    "symbol": {"kind": "laplacian", "dim": 1},
    "g": {"name": "polynomial", "coeffs": [1.0, 1.0]},
    "t0": 0.5,
    "T": 1.0,
    "cutoff": 16,
    "grid_points": None,
    "times": None,
    "seed": None,
    "tau": None,
    "smoothness": "warn",
    "tolerances": {
        "series": 1e-17,
        "quadrature": 1e-9,
        "eps_deg": 1e-8,
        "compat": 1e-8,
        "agreement": 1e-7,
    },
    "contour": {"theta_frac": 0.7, "mu_frac": 0.9, "r_min_exponent": 1,
                "n_arc": 64, "n_ray": 256},
    "free_coefficients": {"default": 0.0, "modes": []},
    "output_dir": "fracinv-out",
    "ml_eval": {"beta": 1.8, "z1_min": -1e5, "z1_max": -0.1, "points": 61,
                "zrest": [-0.5], "orders": None, "asymptotic_order": 3},
    "forward": {
        "f": {"kind": "random", "seed": 1, "decay": 3.0, "band": None},
        "phi": {"kind": "random", "seed": 2, "decay": 3.0, "band": None},
    },
}


class ConfigError(ValueError):
    pass


# variant specs are taken whole rather than merged field by field
WHOLE_KEYS = {"orders", "symbol", "g"}


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in WHOLE_KEYS:
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


@dataclass
class ProblemConfig:
    """Validated configuration. ``data`` is the fully defaulted JSON document."""

    data: dict = field(default_factory=lambda: copy.deepcopy(DEFAULTS))

    @classmethod
    def from_dict(cls, raw: dict) -> "ProblemConfig":
        version = raw.get("schema_version", SCHEMA_VERSION)
        if version != SCHEMA_VERSION:
            raise ConfigError(f"unsupported schema_version {version}")
        unknown = set(raw) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(_merge(DEFAULTS, raw))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "ProblemConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def dumps(self) -> str:
        return json.dumps(self.data, sort_keys=True, indent=2) + "\n"

    def digest(self) -> str:
        """sha256 of the canonical document, ignoring where the run is written."""
        body = {k: v for k, v in self.data.items() if k != "output_dir"}
        canon = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canon.encode()).hexdigest()

    def override(self, **kwargs) -> "ProblemConfig":
        raw = self.to_dict()
        for k, v in kwargs.items():
            if v is not None:
                raw[k] = v
        return ProblemConfig.from_dict(raw)

    # typed views -------------------------------------------------------------

    def validate(self) -> None:
        d = self.data
        try:
            self.orders
            self.symbol
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if not 0 < d["t0"] <= d["T"]:
            raise ConfigError("need 0 < t0 <= T")
        if int(d["cutoff"]) < 1:
            raise ConfigError("cutoff must be at least 1")
        for k, v in d["tolerances"].items():
            if not v > 0:
                raise ConfigError(f"tolerance {k!r} must be positive")
        gp = d["grid_points"]
        if gp is not None and gp < 2 * d["cutoff"] + 1:
            raise ConfigError("grid_points must be at least 2 cutoff + 1")
        if d["smoothness"] not in ("warn", "error", "off"):
            raise ConfigError("smoothness must be 'warn', 'error' or 'off'")
        if self.tau <= self.symbol.dim / 2:
            warnings.warn(f"tau={self.tau} does not exceed N/2", UserWarning, stacklevel=2)

    @property
    def orders(self) -> FractionalOrders:
        o = self.data["orders"]
        return FractionalOrders(tuple(o["rho"]), None if o.get("q") is None else tuple(o["q"]))

    @property
    def symbol(self) -> EllipticSymbol:
        return EllipticSymbol.from_spec(self.data["symbol"])

    @property
    def g(self) -> SourceTimeProfile:
        return SourceTimeProfile.from_spec(self.data["g"], T=self.data["T"])

    @property
    def cutoff(self) -> int:
        return int(self.data["cutoff"])

    @property
    def grid_points(self) -> int:
        gp = self.data["grid_points"]
        return int(gp) if gp is not None else 2 * self.cutoff + 2

    @property
    def tau(self) -> float:
        tau = self.data["tau"]
        return float(tau) if tau is not None else self.symbol.dim / 2 + 0.5

    @property
    def times(self):
        t = self.data["times"]
        d = self.data
        extra = [0.0, d["T"]] if t is None else [float(v) for v in t]
        return sorted(set(extra) | {float(d["t0"])})

    @property
    def policy(self) -> RegimePolicy:
        c, tol = self.data["contour"], self.data["tolerances"]
        return RegimePolicy(series_tol=tol["series"], quad_tol=tol["quadrature"],
                            theta_frac=c["theta_frac"], mu_frac=c["mu_frac"],
                            n_arc=c["n_arc"], n_ray=c["n_ray"],
                            r_min_exponent=c["r_min_exponent"])

    @property
    def free_policy(self) -> FreeCoefficientPolicy:
        fc = self.data["free_coefficients"]
        return FreeCoefficientPolicy.from_mapping(
            {tuple(m["n"]): m["value"] for m in fc.get("modes", [])}, fc.get("default", 0.0))

    def problem(self) -> InverseProblem:
        d, tol = self.data, self.data["tolerances"]
        return InverseProblem(self.orders, self.symbol, self.g, d["t0"], d["T"],
                              eps_deg=tol["eps_deg"], compat_rtol=tol["compat"], tau=self.tau,
                              smoothness=d["smoothness"], policy=self.policy, quad=QuadSpec())
