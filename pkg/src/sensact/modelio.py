"""Config and model file formats.

Configs are strict JSON: unknown keys are rejected with a key-path
diagnostic, matrices are nested row-major lists or one of the compact
forms {"eye": n}, {"eye": n, "scale": s}, {"diag": [...]}. Model files
round-trip losslessly (floats serialize through repr, which is exact for
binary64) and embed a config echo so downstream commands can run without
re-supplying weights.
"""

import json
import os
from dataclasses import dataclass

import numpy as np

from .chance import BoxConstraint
from .exceptions import SchemaError
from .plant import (
    CwParams,
    GainSet,
    SystemModel,
    TargetSpec,
    build_cw_continuous,
    discretize_zoh,
    synthesize_gains,
)
from .search import CostWeights
from .sim import SimConfig

__all__ = [
    "load_config",
    "build_from_config",
    "model_to_dict",
    "model_from_dict",
    "save_model",
    "load_model",
    "cost_weights_from_config",
    "box_from_config",
    "sim_config_from_config",
    "dump_json",
]


def dump_json(obj) -> str:
    """Canonical JSON: sorted keys, 2-space indent, exact float repr."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n"


def _fail(path, msg):
    raise SchemaError(f"{path}: {msg}")


def _expect_keys(obj, path, required, optional=()):
    if not isinstance(obj, dict):
        _fail(path, f"expected an object, got {type(obj).__name__}")
    unknown = set(obj) - set(required) - set(optional)
    if unknown:
        _fail(path, f"unknown key(s) {sorted(unknown)}")
    missing = set(required) - set(obj)
    if missing:
        _fail(path, f"missing required key(s) {sorted(missing)}")


def parse_matrix(spec, path) -> np.ndarray:
    """Nested lists, {"eye": n[, "scale": s]}, or {"diag": [...]}."""
    if isinstance(spec, dict):
        if "eye" in spec:
            _expect_keys(spec, path, ["eye"], ["scale"])
            return float(spec.get("scale", 1.0)) * np.eye(int(spec["eye"]))
        if "diag" in spec:
            _expect_keys(spec, path, ["diag"])
            return np.diag([float(v) for v in spec["diag"]])
        _fail(path, "matrix object must use 'eye' or 'diag'")
    try:
        m = np.array(spec, dtype=float)
    except (TypeError, ValueError):
        _fail(path, "not a numeric matrix")
    if m.ndim == 1 and m.size:
        m = m.reshape(1, -1)
    if m.ndim != 2 or not m.size:
        _fail(path, "expected a non-empty 2-D matrix")
    return m


def _number(obj, path, positive=False):
    if not isinstance(obj, (int, float)) or isinstance(obj, bool):
        _fail(path, "expected a number")
    if positive and obj <= 0:
        _fail(path, "must be positive")
    return float(obj)


def load_config(path) -> dict:
    """Read and validate a config file; returns the parsed dict."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
                              f"{exc.msg}") from exc
    validate_config(raw)
    return raw


def validate_config(cfg: dict):
    _expect_keys(cfg, "$", ["plant", "noise", "gains"], ["cost", "chance", "sim"])

    plant = cfg["plant"]
    _expect_keys(plant, "$.plant", ["ts"], ["cw", "continuous", "c"])
    _number(plant["ts"], "$.plant.ts", positive=True)
    if ("cw" in plant) == ("continuous" in plant):
        _fail("$.plant", "exactly one of 'cw' or 'continuous' is required")
    if "cw" in plant:
        _expect_keys(plant["cw"], "$.plant.cw", ["mass", "mean_motion"])
        _number(plant["cw"]["mass"], "$.plant.cw.mass", positive=True)
        _number(plant["cw"]["mean_motion"], "$.plant.cw.mean_motion", positive=True)
    else:
        _expect_keys(plant["continuous"], "$.plant.continuous", ["a", "b"])
        parse_matrix(plant["continuous"]["a"], "$.plant.continuous.a")
        parse_matrix(plant["continuous"]["b"], "$.plant.continuous.b")
        if "c" not in plant:
            _fail("$.plant", "'c' is required for a 'continuous' plant")
    if "c" in plant:
        parse_matrix(plant["c"], "$.plant.c")

    _expect_keys(cfg["noise"], "$.noise", ["sigma_w", "sigma_v"])
    parse_matrix(cfg["noise"]["sigma_w"], "$.noise.sigma_w")
    parse_matrix(cfg["noise"]["sigma_v"], "$.noise.sigma_v")

    _expect_keys(cfg["gains"], "$.gains", ["q", "r"], ["q_obs", "r_obs"])
    for key in ("q", "r", "q_obs", "r_obs"):
        if key in cfg["gains"]:
            parse_matrix(cfg["gains"][key], f"$.gains.{key}")

    if "cost" in cfg:
        _expect_keys(cfg["cost"], "$.cost", [], ["r_err", "r_state", "r_eta"])
        for key in ("r_err", "r_state"):
            if key in cfg["cost"] and cfg["cost"][key] is not None:
                parse_matrix(cfg["cost"][key], f"$.cost.{key}")
        if "r_eta" in cfg["cost"]:
            _number(cfg["cost"]["r_eta"], "$.cost.r_eta")

    if "chance" in cfg:
        _expect_keys(cfg["chance"], "$.chance", ["delta"], ["bound", "components"])
        _number(cfg["chance"]["delta"], "$.chance.delta", positive=True)
        if "bound" in cfg["chance"]:
            _number(cfg["chance"]["bound"], "$.chance.bound", positive=True)
        if "components" in cfg["chance"]:
            comps = cfg["chance"]["components"]
            if not isinstance(comps, list) or not all(isinstance(i, int) for i in comps):
                _fail("$.chance.components", "expected a list of state indices")

    if "sim" in cfg:
        _expect_keys(cfg["sim"], "$.sim", ["steps", "runs", "seed"],
                     ["x0_mean", "x0_cov", "xhat0", "target"])
        for key in ("steps", "runs", "seed"):
            if not isinstance(cfg["sim"][key], int) or isinstance(cfg["sim"][key], bool):
                _fail(f"$.sim.{key}", "expected an integer")
        for key in ("x0_mean", "xhat0"):
            if key in cfg["sim"] and not isinstance(cfg["sim"][key], list):
                _fail(f"$.sim.{key}", "expected a list of numbers")
        if "x0_cov" in cfg["sim"]:
            parse_matrix(cfg["sim"]["x0_cov"], "$.sim.x0_cov")
        if "target" in cfg["sim"]:
            _expect_keys(cfg["sim"]["target"], "$.sim.target", ["x", "u"])


def build_from_config(cfg: dict):
    """Construct (SystemModel, GainSet) from a validated config."""
    plant = cfg["plant"]
    ts = float(plant["ts"])
    if "cw" in plant:
        params = CwParams(mass=float(plant["cw"]["mass"]),
                          mean_motion=float(plant["cw"]["mean_motion"]), ts=ts)
        a_c, b_c = build_cw_continuous(params)
        default_c = np.hstack([np.eye(3), np.zeros((3, 3))])
    else:
        a_c = parse_matrix(plant["continuous"]["a"], "$.plant.continuous.a")
        b_c = parse_matrix(plant["continuous"]["b"], "$.plant.continuous.b")
        default_c = None
    a, b = discretize_zoh(a_c, b_c, ts)
    c = parse_matrix(plant["c"], "$.plant.c") if "c" in plant else default_c
    model = SystemModel(
        a=a, b=b, c=c,
        sigma_w=parse_matrix(cfg["noise"]["sigma_w"], "$.noise.sigma_w"),
        sigma_v=parse_matrix(cfg["noise"]["sigma_v"], "$.noise.sigma_v"),
        ts=ts,
    )
    gains_cfg = cfg["gains"]
    q = parse_matrix(gains_cfg["q"], "$.gains.q")
    r = parse_matrix(gains_cfg["r"], "$.gains.r")
    q_obs = parse_matrix(gains_cfg["q_obs"], "$.gains.q_obs") if "q_obs" in gains_cfg else None
    r_obs = parse_matrix(gains_cfg["r_obs"], "$.gains.r_obs") if "r_obs" in gains_cfg else None
    gains = synthesize_gains(model, q, r, q_obs, r_obs)
    return model, gains


def cost_weights_from_config(cfg: dict, n: int) -> CostWeights:
    if "cost" not in cfg:
        return CostWeights.estimation(n)
    cost = cfg["cost"]
    r_err = cost.get("r_err")
    r_state = cost.get("r_state")
    return CostWeights(
        r_err=None if r_err is None else parse_matrix(r_err, "$.cost.r_err"),
        r_state=None if r_state is None else parse_matrix(r_state, "$.cost.r_state"),
        r_eta=float(cost.get("r_eta", 0.0)),
    )


def box_from_config(cfg: dict, bound=None):
    chance = cfg.get("chance") or {}
    b = bound if bound is not None else chance.get("bound")
    if b is None:
        return None
    comps = chance.get("components")
    return BoxConstraint(half_width=float(b),
                         components=None if comps is None else tuple(comps))


def sim_config_from_config(cfg: dict, n: int, m: int, overrides=None) -> SimConfig:
    sim = dict(cfg.get("sim") or {})
    sim.update({k: v for k, v in (overrides or {}).items() if v is not None})
    if not {"steps", "runs", "seed"} <= set(sim):
        raise SchemaError("sim section incomplete: steps, runs and seed are required "
                          "(in the config file or via flags)")
    x0_mean = np.asarray(sim.get("x0_mean", np.zeros(n)), dtype=float)
    x0_cov = (parse_matrix(sim["x0_cov"], "$.sim.x0_cov")
              if "x0_cov" in sim else np.zeros((n, n)))
    target = None
    if "target" in sim and sim["target"] is not None:
        target = TargetSpec(np.asarray(sim["target"]["x"], dtype=float),
                            np.asarray(sim["target"]["u"], dtype=float))
    return SimConfig(
        steps=int(sim["steps"]),
        runs=int(sim["runs"]),
        seed=int(sim["seed"]),
        x0_mean=x0_mean,
        x0_cov=x0_cov,
        xhat0=np.asarray(sim["xhat0"], dtype=float) if "xhat0" in sim else None,
        target=target,
    )


MODEL_KIND = "sensact-model"
MODEL_VERSION = 1


def model_to_dict(model: SystemModel, gains: GainSet, summary=None, config_echo=None) -> dict:
    doc = {
        "kind": MODEL_KIND,
        "version": MODEL_VERSION,
        "ts": model.ts,
        "a": model.a.tolist(),
        "b": model.b.tolist(),
        "c": model.c.tolist(),
        "sigma_w": model.sigma_w.tolist(),
        "sigma_v": model.sigma_v.tolist(),
        "k": gains.k.tolist(),
        "l": gains.l.tolist(),
    }
    if summary is not None:
        doc["summary"] = summary
    if config_echo is not None:
        doc["config"] = config_echo
    return doc


def model_from_dict(doc: dict):
    if not isinstance(doc, dict) or doc.get("kind") != MODEL_KIND:
        raise SchemaError("not a sensact model file")
    if doc.get("version") != MODEL_VERSION:
        raise SchemaError(f"unsupported model file version {doc.get('version')!r}")
    for key in ("a", "b", "c", "sigma_w", "sigma_v", "k", "l", "ts"):
        if key not in doc:
            raise SchemaError(f"model file missing key {key!r}")
    model = SystemModel(
        a=np.array(doc["a"], dtype=float),
        b=np.array(doc["b"], dtype=float),
        c=np.array(doc["c"], dtype=float),
        sigma_w=np.array(doc["sigma_w"], dtype=float),
        sigma_v=np.array(doc["sigma_v"], dtype=float),
        ts=float(doc["ts"]),
    )
    k = np.array(doc["k"], dtype=float)
    l = np.array(doc["l"], dtype=float)
    from . import linalg  # late import keeps module load order simple
    gains = GainSet(
        k=k, l=l,
        rho_feedback=linalg.spectral_radius(model.a + model.b @ k),
        rho_observer=linalg.spectral_radius(model.a + l @ model.c),
    )
    return model, gains, doc.get("config")


def save_model(path, model, gains, summary=None, config_echo=None):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dump_json(model_to_dict(model, gains, summary, config_echo)))


def load_model(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return model_from_dict(doc)


def resolve_config_path(path: str) -> str:
    """Fall back to $SENSACT_CONFIG_DIR for bare file names."""
    if os.path.exists(path):
        return path
    base = os.environ.get("SENSACT_CONFIG_DIR")
    if base and not os.path.isabs(path):
        candidate = os.path.join(base, path)
        if os.path.exists(candidate):
            return candidate
    return path
