"""Run configuration: a YAML file with model, sampler, data and output blocks.

Command-line ``--set block.key=value`` overrides are applied on top of the
file; values are parsed as YAML scalars.
"""
from __future__ import annotations

import copy
import os
from pathlib import Path

import yaml


class ConfigError(ValueError):
    """Invalid or inconsistent run configuration."""


DEFAULTS = {
    "model": {
        "c": None,
        "reference_class": None,
        "rho": 0.0,
        # 4 suits standardized predictors; use 25 for a diffuse prior
        "tau2": 4.0,
        "gamma1": 5.0,
        "gamma2": 15.0,
        "mu0": None,
        "mu": None,
    },
    "sampler": {
        "iterations": 11000,
        "burn_in": 1000,
        "thin": 10,
        "seeds": [1],
        "chains": 1,
        "starts": ["empty"],
        "q_proposal_scale": 0.5,
        "selection": "csps",
        "workers": None,
    },
    "data": {
        "input": None,
        "scenario": None,
        "seed": 0,
        "label_column": "label",
        "standardize": True,
        "rbf": None,
    },
    "output": {
        "directory": "csps-out",
        "emit_draws": True,
    },
    "cv": {
        "mode": "kfold",
        "k": 10,
        "seed": 0,
        "count": 25,
        "fraction": 0.5,
    },
    "screen": {
        "threshold": 0.5,
    },
}

RBF_DEFAULTS = {"n_knots": 54, "bandwidth": 4.0, "seed": 0}
SELECTIONS = ("csps", "nops")


def _merge(base: dict, extra: dict, where: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in (extra or {}).items():
        if key not in out:
            raise ConfigError(f"unknown config key {where}{key}")
        if isinstance(out[key], dict) and isinstance(val, dict):
            out[key] = _merge(out[key], val, f"{where}{key}.")
        else:
            out[key] = val
    return out


def parse_override(text: str) -> tuple[list[str], object]:
    if "=" not in text:
        raise ConfigError(f"override {text!r} is not of the form block.key=value")
    key, raw = text.split("=", 1)
    path = key.strip().split(".")
    if len(path) < 2:
        raise ConfigError(f"override key {key!r} must name a block and a key")
    return path, yaml.safe_load(raw) if raw.strip() else None


def apply_overrides(cfg: dict, overrides) -> dict:
    cfg = copy.deepcopy(cfg)
    for text in overrides or ():
        path, val = parse_override(text)
        node = cfg
        for part in path[:-1]:
            if not isinstance(node.get(part), dict):
                if part == "rbf" and node.get(part) is None:
                    node[part] = dict(RBF_DEFAULTS)
                else:
                    raise ConfigError(f"unknown config block {'.'.join(path[:-1])}")
            node = node[part]
        if path[-1] not in node and not (path[-2] == "rbf"):
            raise ConfigError(f"unknown config key {'.'.join(path)}")
        node[path[-1]] = val
    return cfg


def load_config(path=None, overrides=None) -> dict:
    raw = {}
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file {path} does not exist")
        with path.open(encoding="utf-8") as fh:
            raw = yaml.safe_load(fh) or {}
        if not isinstance(raw, dict):
            raise ConfigError("config file must hold a mapping of blocks")
        base_dir = path.parent
    cfg = _merge(DEFAULTS, raw)
    cfg = apply_overrides(cfg, overrides)
    inp = cfg["data"]["input"]
    if inp is not None and not Path(inp).is_absolute():
        cfg["data"]["input"] = str((base_dir / inp).resolve())
    return validate(cfg)


def validate(cfg: dict) -> dict:
    m, s, d = cfg["model"], cfg["sampler"], cfg["data"]
    try:
        for key in ("rho", "tau2", "gamma1", "gamma2"):
            m[key] = float(m[key])
        for key in ("iterations", "burn_in", "thin", "chains"):
            s[key] = int(s[key])
        s["q_proposal_scale"] = float(s["q_proposal_scale"])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"non-numeric config value: {exc}") from None
    if not 0.0 <= m["rho"] <= 1.0:
        raise ConfigError("model.rho must lie in [0, 1]")
    if m["tau2"] <= 0 or m["gamma1"] <= 0 or m["gamma2"] <= 0:
        raise ConfigError("model.tau2, gamma1 and gamma2 must be positive")
    if s["thin"] < 1 or not 0 <= s["burn_in"] < s["iterations"]:
        raise ConfigError("sampler needs thin >= 1 and 0 <= burn_in < iterations")
    if s["chains"] < 1:
        raise ConfigError("sampler.chains must be >= 1")
    seeds = s["seeds"]
    if isinstance(seeds, int):
        seeds = [seeds + i for i in range(s["chains"])]
    if len(seeds) < s["chains"]:
        raise ConfigError("sampler.seeds must list one explicit seed per chain")
    s["seeds"] = [int(x) for x in seeds[: s["chains"]]]
    starts = s["starts"]
    if isinstance(starts, str):
        starts = [x.strip() for x in starts.split(",")]
    if len(starts) == 1:
        starts = starts * s["chains"]
    if len(starts) != s["chains"]:
        raise ConfigError("sampler.starts must give one start per chain")
    bad = [x for x in starts if x not in ("empty", "full", "random")]
    if bad:
        raise ConfigError(f"unknown start(s) {bad}")
    s["starts"] = starts
    if s["selection"] not in SELECTIONS:
        raise ConfigError(f"sampler.selection must be one of {SELECTIONS}")
    if s["workers"] is None:
        s["workers"] = os.cpu_count() or 1
    s["workers"] = max(1, int(s["workers"]))
    if d["input"] is None and d["scenario"] is None:
        raise ConfigError("data block needs an input path or a scenario")
    if d["input"] is not None and not Path(d["input"]).exists():
        raise ConfigError(f"data.input {d['input']} does not exist")
    if d["scenario"] is not None and int(d["scenario"]) not in (1, 2):
        raise ConfigError(f"unknown scenario {d['scenario']!r}")
    if d["rbf"] is not None:
        rbf = dict(RBF_DEFAULTS)
        rbf.update(d["rbf"] if isinstance(d["rbf"], dict) else {})
        if int(rbf["n_knots"]) < 1 or float(rbf["bandwidth"]) <= 0:
            raise ConfigError("data.rbf needs n_knots >= 1 and bandwidth > 0")
        d["rbf"] = rbf
    if cfg["cv"]["mode"] not in ("kfold", "loocv", "repeated-split"):
        raise ConfigError("cv.mode must be kfold, loocv or repeated-split")
    return cfg


def dump_config(cfg: dict) -> str:
    return yaml.safe_dump(cfg, sort_keys=False)
