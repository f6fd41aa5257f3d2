"""Experiment configuration: strict JSON schema with documented defaults."""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .model import AlphaProfile, ModelSpec

TABLES = ("critical", "barrier", "aubry", "mather", "discounted", "trajectory", "ladder", "selection")

DEFAULTS = {
    "model": {"family": "mechanical", "potential": [[2, 1.0, 0.0]]},
    "alpha": {"kind": "vanishing_band", "start": 0.55, "end": 0.70, "level": 1.0, "ramp": 0.05},
    "alpha_alternatives": None,
    "grid": {"N": 256, "K": 4, "dt": 1 / 64, "quadrature": "source"},
    "ladder": {"lambda_start": 0.5, "ratio": 0.5, "rungs": 10},
    "tolerances": {"tol_fp": 1e-10, "tol_h": None, "tol_aubry": None, "tol_sel": None,
                   "tol_mmc": 1e-9, "tol_tight": None},
    "solver": {"window": 4, "max_iter": 1_000_000, "cycle_length": None, "max_measures": 64,
               "trajectory_steps": 2000, "excursion_steps": 200, "excursion_window": 1.0},
    "outputs": {"directory": "out", "tables": list(TABLES)},
    "seed": 0,
}

ALPHA_KEYS = {
    "constant": {"level"},
    "positive_sinusoid": {"base", "amplitude", "phase"},
    "vanishing_band": {"start", "end", "level", "ramp"},
}


class ConfigError(ValueError):
    def __init__(self, path, message):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path


def _number(value, path, *, positive=False, nonneg=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"expected a number, got {value!r}")
    if integer and int(value) != value:
        raise ConfigError(path, f"expected an integer, got {value!r}")
    if positive and not value > 0:
        raise ConfigError(path, f"must be > 0, got {value!r}")
    if nonneg and value < 0:
        raise ConfigError(path, f"must be >= 0, got {value!r}")
    return int(value) if integer else float(value)


def _check_keys(obj, allowed, path):
    if not isinstance(obj, dict):
        raise ConfigError(path, "expected an object")
    for key in obj:
        if key not in allowed:
            where = f"{path}.{key}" if path else key
            raise ConfigError(where, "unknown key")


def _merge(defaults, given, path):
    _check_keys(given, defaults.keys(), path)
    out = copy.deepcopy(defaults)
    for key, val in given.items():
        out[key] = val
    return out


def parse_model(raw, path="model"):
    _check_keys(raw, {"family", "potential", "omega", "amplitude"}, path)
    family = raw.get("family")
    if family == "mechanical":
        _check_keys(raw, {"family", "potential"}, path)
        terms = raw.get("potential", [])
        if not isinstance(terms, list):
            raise ConfigError(f"{path}.potential", "expected a list of [k, a, phi] triples")
        out = []
        for n, t in enumerate(terms):
            p = f"{path}.potential[{n}]"
            if not isinstance(t, list) or len(t) != 3:
                raise ConfigError(p, "expected [k, a, phi]")
            k = _number(t[0], p, integer=True, positive=True)
            out.append((k, _number(t[1], p), _number(t[2], p)))
        try:
            return ModelSpec.mechanical(out)
        except ValueError as exc:
            raise ConfigError(f"{path}.potential", str(exc)) from None
    if family == "rotation":
        _check_keys(raw, {"family", "omega", "amplitude"}, path)
        if "omega" not in raw:
            raise ConfigError(f"{path}.omega", "required for the rotation family")
        try:
            return ModelSpec.rotation(_number(raw["omega"], f"{path}.omega"),
                                      _number(raw.get("amplitude", 0.0), f"{path}.amplitude"))
        except ValueError as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(path, str(exc)) from None
    raise ConfigError(f"{path}.family", f"expected 'mechanical' or 'rotation', got {family!r}")


def parse_alpha(raw, path="alpha"):
    if not isinstance(raw, dict):
        raise ConfigError(path, "expected an object")
    kind = raw.get("kind")
    if kind not in ALPHA_KEYS:
        raise ConfigError(f"{path}.kind", f"expected one of {sorted(ALPHA_KEYS)}, got {kind!r}")
    _check_keys(raw, ALPHA_KEYS[kind] | {"kind"}, path)
    try:
        if kind == "constant":
            return AlphaProfile.constant(_number(raw.get("level", 1.0), f"{path}.level", nonneg=True))
        if kind == "positive_sinusoid":
            return AlphaProfile.positive_sinusoid(_number(raw["base"], f"{path}.base"),
                                                  _number(raw["amplitude"], f"{path}.amplitude"),
                                                  _number(raw.get("phase", 0.0), f"{path}.phase"))
        return AlphaProfile.vanishing_band(_number(raw["start"], f"{path}.start"),
                                           _number(raw["end"], f"{path}.end"),
                                           _number(raw.get("level", 1.0), f"{path}.level", positive=True),
                                           _number(raw.get("ramp", 0.05), f"{path}.ramp", positive=True))
    except KeyError as exc:
        raise ConfigError(f"{path}.{exc.args[0]}", "required") from None
    except ConfigError:
        raise
    except ValueError as exc:
        raise ConfigError(path, str(exc)) from None


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    alpha: AlphaProfile
    alpha_alternatives: tuple
    N: int
    K: int
    dt: float
    quadrature: str
    lambdas: tuple
    tol_fp: float
    tol_h: float
    tol_aubry: float
    tol_sel: float
    tol_mmc: float
    tol_tight: float | None  # None: 1e-8 (1 + |c_grid|) dt, known once c_grid is
    window: int
    max_iter: int
    cycle_length: int
    max_measures: int
    trajectory_steps: int
    excursion_steps: int
    excursion_window: float
    out_dir: Path
    tables: tuple
    seed: int
    effective: dict  # fully resolved document, echoed as config.effective.json


def validate(doc) -> ExperimentConfig:
    if not isinstance(doc, dict):
        raise ConfigError("", "config must be a single JSON object")
    _check_keys(doc, DEFAULTS.keys(), "")
    eff = copy.deepcopy(DEFAULTS)
    for section in ("grid", "ladder", "tolerances", "solver", "outputs"):
        if section in doc:
            eff[section] = _merge(DEFAULTS[section], doc[section], section)
    if "model" in doc:
        eff["model"] = doc["model"]
    if "alpha" in doc:
        eff["alpha"] = doc["alpha"]
    if "alpha_alternatives" in doc:
        eff["alpha_alternatives"] = doc["alpha_alternatives"]
    if "seed" in doc:
        eff["seed"] = doc["seed"]

    model = parse_model(eff["model"])
    alpha = parse_alpha(eff["alpha"])
    alts = eff["alpha_alternatives"]
    if alts is None:
        alts = []
    if not isinstance(alts, list):
        raise ConfigError("alpha_alternatives", "expected a list of alpha objects")
    alternatives = tuple(parse_alpha(a, f"alpha_alternatives[{n}]") for n, a in enumerate(alts))

    g = eff["grid"]
    N = _number(g["N"], "grid.N", integer=True, positive=True)
    if N < 8:
        raise ConfigError("grid.N", "must be >= 8")
    K = _number(g["K"], "grid.K", integer=True, positive=True)
    if K > N // 4:
        raise ConfigError("grid.K", f"must be <= N/4 = {N // 4}")
    dt = _number(g["dt"], "grid.dt", positive=True)
    if g["quadrature"] not in ("source", "midpoint"):
        raise ConfigError("grid.quadrature", "expected 'source' or 'midpoint'")

    lad = eff["ladder"]
    lam0 = _number(lad["lambda_start"], "ladder.lambda_start", positive=True)
    ratio = _number(lad["ratio"], "ladder.ratio", positive=True)
    if not ratio < 1:
        raise ConfigError("ladder.ratio", "must lie in (0, 1)")
    rungs = _number(lad["rungs"], "ladder.rungs", integer=True, positive=True)
    lambdas = tuple(lam0 * ratio**k for k in range(rungs))
    if lambdas[-1] < 1e-4:
        raise ConfigError("ladder.rungs", f"smallest lambda {lambdas[-1]:.3g} is below 1e-4")

    tol = eff["tolerances"]
    tv = {}
    for key, val in tol.items():
        tv[key] = None if val is None else _number(val, f"tolerances.{key}", positive=True)
    tol_h = tv["tol_h"] if tv["tol_h"] is not None else 1e-9 * N
    tol_aubry = tv["tol_aubry"] if tv["tol_aubry"] is not None else 10 * tol_h
    tol_sel = tv["tol_sel"] if tv["tol_sel"] is not None else 1e-6 * N * dt

    s = eff["solver"]
    window = _number(s["window"], "solver.window", integer=True, positive=True)
    max_iter = _number(s["max_iter"], "solver.max_iter", integer=True, positive=True)
    cyc = N if s["cycle_length"] is None else _number(s["cycle_length"], "solver.cycle_length",
                                                      integer=True, positive=True)
    max_measures = _number(s["max_measures"], "solver.max_measures", integer=True, positive=True)
    traj = _number(s["trajectory_steps"], "solver.trajectory_steps", integer=True, nonneg=True)
    exc = _number(s["excursion_steps"], "solver.excursion_steps", integer=True, positive=True)
    if exc < 100:
        raise ConfigError("solver.excursion_steps", "must be >= 100")
    exc_win = _number(s["excursion_window"], "solver.excursion_window", positive=True)

    o = eff["outputs"]
    if not isinstance(o["directory"], str) or not o["directory"]:
        raise ConfigError("outputs.directory", "expected a non-empty string")
    if not isinstance(o["tables"], list):
        raise ConfigError("outputs.tables", "expected a list")
    for n, t in enumerate(o["tables"]):
        if t not in TABLES:
            raise ConfigError(f"outputs.tables[{n}]", f"unknown table {t!r}")
    seed = _number(eff["seed"], "seed", integer=True, nonneg=True)

    return ExperimentConfig(model, alpha, alternatives, N, K, dt, g["quadrature"], lambdas,
                            tv["tol_fp"], tol_h, tol_aubry, tol_sel, tv["tol_mmc"], tv["tol_tight"],
                            window, max_iter, cyc, max_measures, traj, exc, exc_win,
                            Path(o["directory"]), tuple(o["tables"]), seed, eff)


def bundled_configs():
    return sorted(p.name[:-5] for p in resources.files("weakkam").joinpath("configs").iterdir()
                  if p.name.endswith(".json"))


def read_document(path):
    """Parse a config file; bare names resolve to the bundled configs."""
    p = Path(path)
    if not p.exists():
        name = p.name[:-5] if p.name.endswith(".json") else p.name
        if p.parent == Path(".") and name in bundled_configs():
            text = resources.files("weakkam").joinpath("configs", name + ".json").read_text()
        else:
            raise ConfigError("", f"config file not found: {path}")
    else:
        text = p.read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("", f"invalid JSON: {exc}") from None


def load_config(path) -> ExperimentConfig:
    return validate(read_document(path))


def barrier_key(cfg: ExperimentConfig):
    """The part of the effective config that determines barrier.csv."""
    e = cfg.effective
    return {"model": e["model"], "grid": e["grid"], "tol_h": cfg.tol_h, "window": cfg.window}
