import json

import pytest

from fracinv.config import DEFAULTS, SCHEMA_VERSION, ConfigError, ProblemConfig
from fracinv.fracode import SourceTimeProfile


def test_defaults_are_valid():
    cfg = ProblemConfig.from_dict({})
    assert cfg.data == DEFAULTS
    assert cfg.orders.rho == (0.7, 0.4)
    assert cfg.grid_points == 2 * cfg.cutoff + 2
    assert cfg.tau == 1.0
    assert cfg.times == [0.0, 0.5, 1.0]


def test_roundtrip_is_idempotent(tmp_path):
    cfg = ProblemConfig.from_dict({"cutoff": 8, "g": {"name": "cosine", "omega": 2.0},
                                   "symbol": {"kind": "biharmonic", "dim": 2}})
    p = tmp_path / "c.json"
    p.write_text(cfg.dumps())
    again = ProblemConfig.load(p)
    assert again.dumps() == cfg.dumps()
    assert again.digest() == cfg.digest()
    assert json.loads(cfg.dumps())["schema_version"] == SCHEMA_VERSION


def test_partial_nested_override_keeps_defaults():
    cfg = ProblemConfig.from_dict({"tolerances": {"eps_deg": 1e-6}})
    assert cfg.data["tolerances"]["eps_deg"] == 1e-6
    assert cfg.data["tolerances"]["compat"] == DEFAULTS["tolerances"]["compat"]
    assert cfg.problem().eps_deg == 1e-6


@pytest.mark.parametrize("raw", [
    {"schema_version": 2},
    {"cutof": 3},
    {"t0": 2.0},
    {"t0": 0.0},
    {"cutoff": 0},
    {"tolerances": {"series": 0.0}},
    {"grid_points": 4},
    {"smoothness": "loud"},
    {"orders": {"rho": [0.4, 0.7]}},
    {"symbol": {"dim": 1, "order": 3, "coeffs": [{"alpha": [3], "value": 1.0}]}},
])
def test_invalid_configs_rejected(raw):
    with pytest.raises(ConfigError):
        ProblemConfig.from_dict(raw)


def test_small_tau_warns():
    with pytest.warns(UserWarning, match="N/2"):
        ProblemConfig.from_dict({"tau": 0.4})


def test_times_always_include_t0():
    cfg = ProblemConfig.from_dict({"times": [0.1, 0.9], "t0": 0.3})
    assert cfg.times == [0.1, 0.3, 0.9]


def test_override_ignores_none():
    cfg = ProblemConfig().override(cutoff=None, t0=0.25)
    assert cfg.cutoff == DEFAULTS["cutoff"] and cfg.data["t0"] == 0.25


def test_typed_views():
    cfg = ProblemConfig.from_dict({
        "g": {"name": "exponential", "rate": -1.0},
        "contour": {"theta_frac": 0.6},
        "free_coefficients": {"default": 2.0, "modes": [{"n": [3], "value": 5.0}]},
    })
    assert isinstance(cfg.g, SourceTimeProfile) and cfg.g(0.0) == 1.0
    assert cfg.policy.theta_frac == 0.6
    assert cfg.free_policy.value_for((3,)) == 5.0
    assert cfg.free_policy.value_for((1,)) == 2.0
