"""Experiment configuration: JSON files merged over per-experiment defaults and validated."""

import copy
import json
from math import pi

from ..errors import ConfigError

EXPERIMENTS = ("conv_meanfield", "exchange_scaling", "hierarchy_bounds", "vlasov_gap",
               "appendix_checks", "residuals")

POTENTIAL_KEYS = {"gaussian": ("u0", "sigma"), "cosine": ("u0", "k0"), "coulomb": ("u0",), "zero": ()}

COMMON = {
    "seed": 0,
    "output": None,
    "threads": 1,
    "grid": {"points": 128, "extent": pi},
    "potential": {"kind": "gaussian", "u0": 1.0, "sigma": 0.7},
    "time": {"t_final": 1.0, "dt": 0.005},
    "fit_exclude": 2,
}

DEFAULTS = {
    "exchange_scaling": {
        "sweep": {"N": [64, 128, 256, 512, 1024, 2048, 4096]},
        "params": {"kappa": 1.0, "velocity_width": 1.0},
        "tolerances": {"slope": 0.1, "r_squared": 0.98},
    },
    "conv_meanfield": {
        "grid": {"points": 128, "extent": pi},
        "sweep": {"N": [4, 8, 16, 32], "N_exact": [2, 3]},
        "time": {"t_final": 0.5, "dt": 0.01},
        "params": {"modulation": 0.5, "exact_points": 32, "exact_epsilon": 0.5, "husimi_x": 64,
                   "husimi_v": 61, "husimi_vmax": 1.5},
        "tolerances": {"slope_max": 0.0, "energy_slope": 0.15},
        "fit_exclude": 0,
    },
    "residuals": {
        "grid": {"points": 128, "extent": pi},
        "time": {"t_final": 1.0, "dt": 0.005},
        "params": {"epsilon": 0.5, "residual_t": 0.4, "residual_dt": 0.01, "husimi_points": 64,
                   "husimi_epsilon": 0.25, "husimi_N": 3, "husimi_widths": [0.2, 0.4], "husimi_states": 5,
                   "delta1": [0.125, 0.25, 0.5, 1.0, 2.0], "delta2": [0.25, 0.5, 1.0, 2.0, 4.0],
                   "mu_states": 20, "mu_points": 32, "mu_N": 3, "mu_epsilon": 0.5},
        "tolerances": {"norm_drift": 1e-10, "antisymmetry": 1e-9, "trace_drift": 1e-6,
                       "energy_drift": 1e-6, "pauli": 1e-9, "richardson": 0.5, "bbgky": 1e-5,
                       "positivity": 1e-9, "witness": 1e-4, "mu": 1e-10, "free_residual": 1e-6},
    },
    "hierarchy_bounds": {
        "potentials": [{"kind": "cosine", "u0": 1.0, "k0": 1.0}, {"kind": "gaussian", "u0": 1.0, "sigma": 1.0}],
        "params": {"ell": [1, 2], "n": [1, 2], "samples": 10, "t": 0.1, "delta1": 1.0, "delta2": 1.0,
                   "kappa2": 1.0, "epsilon": 0.5, "duhamel": True, "duhamel_t": 0.05,
                   "duhamel_points": 32, "duhamel_epsilon": 0.5, "duhamel_N": 2, "duhamel_seed": 3,
                   "lemma_alpha_max": 6},
        "tolerances": {"duhamel": 1e-4, "norm": 1e-4, "kappa_t": 1e-12, "horizon": 1e-7},
    },
    "appendix_checks": {
        "sweep": {"N": [8, 16, 32, 64, 128], "N_localized": [4, 8, 16, 32, 64], "alpha_factors": [1, 2, 4, 8, 16, 32, 64]},
        "grid": {"points": 256, "extent": 20.0},
        "time": {"t_final": None, "dt": 0.0005},
        "params": {"epsilon": 0.1, "width": 1.0, "tail_lambda": 2.0, "tail_nu": [0.05, 0.1, 0.2],
                   "tail_states": 5, "sample_every": 10},
        "tolerances": {"exponent": 0.15, "cross": 1e-8},
        "fit_exclude": 0,
    },
    "vlasov_gap": {
        "potential": {"kind": "cosine", "u0": 0.2, "k0": 1.0},
        "sweep": {"epsilon": [0.4, 0.2, 0.1, 0.05]},
        "grid": {"points": 128, "extent": pi},
        "time": {"t_final": None, "dt": None},
        "params": {"steps": 40, "sigma_x": 0.5, "sigma_v": 0.5, "x0": 0.3, "v0": 0.4, "v_points": 128,
                   "v_extent": 3.2, "delta1": None},
    },
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict) and k not in ("potential",):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def defaults(experiment: str) -> dict:
    if experiment not in EXPERIMENTS:
        raise ConfigError(f"experiment: unknown {experiment!r}; choose from {', '.join(EXPERIMENTS)}")
    cfg = _merge(COMMON, DEFAULTS[experiment])
    cfg.setdefault("sweep", {})
    cfg.setdefault("params", {})
    cfg.setdefault("tolerances", {})
    cfg["experiment"] = experiment
    return cfg


def _fail(field: str, msg: str):
    raise ConfigError(f"{field}: {msg}")


def _number(cfg, field, value, positive=True, allow_none=False):
    if value is None and allow_none:
        return
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        _fail(field, f"expected a number, got {value!r}")
    if positive and not value > 0:
        _fail(field, f"must be positive, got {value!r}")


def validate_potential(spec: dict, field: str = "potential"):
    if not isinstance(spec, dict) or "kind" not in spec:
        _fail(field, "expected an object with a 'kind'")
    kind = spec["kind"]
    if kind not in POTENTIAL_KEYS:
        _fail(f"{field}.kind", f"unknown potential {kind!r}")
    extra = set(spec) - set(POTENTIAL_KEYS[kind]) - {"kind"}
    if extra:
        _fail(field, f"unexpected keys {sorted(extra)} for {kind}")
    for k in POTENTIAL_KEYS[kind]:
        if k in spec:
            _number(spec, f"{field}.{k}", spec[k], positive=(k != "u0"))


def validate(cfg: dict) -> dict:
    exp = cfg.get("experiment")
    if exp not in EXPERIMENTS:
        _fail("experiment", f"unknown {exp!r}; choose from {', '.join(EXPERIMENTS)}")
    allowed = set(defaults(exp))
    extra = set(cfg) - allowed
    if extra:
        _fail(sorted(extra)[0], "unknown field")
    g = cfg["grid"]
    if not isinstance(g.get("points"), int) or isinstance(g.get("points"), bool) or g["points"] < 8 or g["points"] % 2:
        _fail("grid.points", f"must be an even integer >= 8, got {g.get('points')!r}")
    _number(cfg, "grid.extent", g.get("extent"))
    if "potential" in cfg:
        validate_potential(cfg["potential"])
    for i, p in enumerate(cfg.get("potentials", [])):
        validate_potential(p, f"potentials[{i}]")
    t = cfg["time"]
    _number(cfg, "time.t_final", t.get("t_final"), positive=False, allow_none=True)
    _number(cfg, "time.dt", t.get("dt"), allow_none=True)
    if t.get("t_final") is not None and t["t_final"] < 0:
        _fail("time.t_final", "must be nonnegative")
    if t.get("t_final") and t.get("dt") and t["dt"] > t["t_final"]:
        _fail("time.dt", f"dt = {t['dt']} exceeds t_final = {t['t_final']}")
    if not isinstance(cfg["seed"], int) or isinstance(cfg["seed"], bool):
        _fail("seed", "must be an integer")
    if not isinstance(cfg["threads"], int) or cfg["threads"] < 1:
        _fail("threads", "must be a positive integer")
    if not isinstance(cfg["fit_exclude"], int) or cfg["fit_exclude"] < 0:
        _fail("fit_exclude", "must be a nonnegative integer")
    for key, vals in cfg["sweep"].items():
        if not isinstance(vals, list) or not vals:
            _fail(f"sweep.{key}", "must be a nonempty list")
        for v in vals:
            _number(cfg, f"sweep.{key}", v)
        if key in ("N", "N_exact", "N_localized") and any(not isinstance(v, int) for v in vals):
            _fail(f"sweep.{key}", "particle numbers must be integers")
        if key in ("N", "N_exact", "N_localized") and sorted(vals) != list(vals):
            _fail(f"sweep.{key}", "must be increasing")
    for key, v in cfg["tolerances"].items():
        _number(cfg, f"tolerances.{key}", v, positive=False)
        if v < 0:
            _fail(f"tolerances.{key}", "must be nonnegative")
    known = set(DEFAULTS[exp].get("tolerances", {}))
    unknown = set(cfg["tolerances"]) - known
    if unknown:
        _fail(f"tolerances.{sorted(unknown)[0]}", "unknown tolerance")
    unknown = set(cfg["params"]) - set(DEFAULTS[exp].get("params", {}))
    if unknown:
        _fail(f"params.{sorted(unknown)[0]}", "unknown parameter")
    if exp == "hierarchy_bounds":
        p = cfg["params"]
        if any(v not in (1, 2) for v in p["ell"]) or any(v not in (1, 2) for v in p["n"]):
            _fail("params.ell", "ell and n must be drawn from {1, 2}")
    return cfg


def load_config(path: str = None, experiment: str = None, overrides: dict = None) -> dict:
    """Read a JSON config (optional), merge it over the defaults of its experiment and validate."""
    user = {}
    if path is not None:
        try:
            with open(path) as fh:
                user = json.load(fh)
        except OSError as err:
            raise ConfigError(f"config: cannot read {path}: {err}") from err
        except json.JSONDecodeError as err:
            raise ConfigError(f"config: {path} is not valid JSON ({err})") from err
        if not isinstance(user, dict):
            raise ConfigError("config: top level must be an object")
    exp = user.get("experiment", experiment)
    if experiment is not None and exp != experiment:
        raise ConfigError(f"experiment: config names {exp!r} but {experiment!r} was requested")
    cfg = _merge(defaults(exp), user)
    if overrides:
        cfg = _merge(cfg, overrides)
    return validate(cfg)
