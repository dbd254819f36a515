"""Pipeline configuration: defaults, JSON loading and ``key=value`` overrides."""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

from .demand import PoiWeightTable
from .hexgrid import GridSpec
from .queueing import AREA_INSTALL_MULTIPLIER, CHARGER_COSTS, SERVICE_RATES

STAGES = ("grid", "centrality", "demand", "mclp", "voronoi", "queue", "forecast", "report")
PATH_ENV = "EVSITING_DATA_DIR"


class ConfigError(ValueError):
    pass


def _midpoints() -> dict:
    return {t: {"unit": sum(v["unit"]) / 2.0, "install": sum(v["install"]) / 2.0}
            for t, v in CHARGER_COSTS.items()}


def default_config() -> dict:
    return {
        "seed": 0,
        "stages": list(STAGES),
        "grid": GridSpec().to_dict(),
        "inputs": {
            "zones": "zones.geojson",
            "edges": "edges.csv",
            "cells": "cells.csv",
            "pois": "pois.csv",
            "counties": "counties.csv",
            "traffic": "traffic.csv",
            "hubs": None,
            "exclusions": None,
        },
        "output_dir": "out",
        "centrality": {
            "tau": 0.5,
            "hidden_dim": 16,
            "learning_rate": 0.01,
            "epochs": 500,
            "weight_decay": 0.0,
            "training_zones": None,
            "n_training_zones": 2,
            "weighted_betweenness": False,
        },
        "demand": {
            "w_pop": 0.6,
            "w_poi": 0.4,
            "feature_resolution": 8,
            "demand_resolution": 10,
            "poi_weights": dict(PoiWeightTable().weights),
        },
        "mclp": {
            "radius_m": 5_000.0,
            "beta_poi": 0.6,
            "beta_cent": 0.4,
            "beta_cov": 0.6,
            "k": 5,
            "P": 10,
            "alpha": None,
            "one_per_zone": False,
            "zone_cap": None,
            "income_upweight": 1.0,
        },
        "queue": {
            "rho_cap": 0.9,
            "extra_capacity": 10,
            "c_max": 60,
            "service_rates": dict(SERVICE_RATES),
            "costs": _midpoints(),
            "area_install_multiplier": dict(AREA_INSTALL_MULTIPLIER),
            "charger_type_by_area": {a: "DCFC" for a in AREA_INSTALL_MULTIPLIER},
            "outage_events": [],
            "households": 0,
            "days": 365,
            "convention": "continuous",
        },
        "voronoi": {
            "threshold_m": 30_000.0,
            "resolution": 6,
            "min_ports": 5,
        },
        "forecast": {
            "base_year": 2025,
            "years": [2026, 2027, 2028, 2029, 2030],
            "envelope": {},
        },
        "report": {
            "radii_m": [5_000.0, 30_000.0, 40_000.0],
            "area_samples": 100_000,
        },
    }


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_override(cfg: dict, assignment: str) -> None:
    """Apply ``dotted.key=value``; the value is parsed as JSON when possible."""
    if "=" not in assignment:
        raise ConfigError(f"override {assignment!r} is not of the form key=value")
    key, raw = assignment.split("=", 1)
    parts = key.strip().split(".")
    node = cfg
    for part in parts[:-1]:
        if not isinstance(node.get(part), dict):
            raise ConfigError(f"unknown config section {key!r}")
        node = node[part]
    if parts[-1] not in node:
        raise ConfigError(f"unknown config key {key!r}")
    node[parts[-1]] = _parse_value(raw)


def _merge(base: dict, update: dict, where: str = "") -> None:
    for key, value in update.items():
        if key not in base:
            raise ConfigError(f"unknown config key {where + key!r}")
        if isinstance(base[key], dict) and isinstance(value, dict) and key not in (
                "poi_weights", "envelope", "edge_lengths"):
            _merge(base[key], value, f"{where}{key}.")
        else:
            base[key] = value


def load_config(path=None, overrides=(), seed=None) -> dict:
    cfg = default_config()
    base_dir = Path.cwd()
    if path is not None:
        path = Path(path)
        with open(path) as fh:
            try:
                _merge(cfg, json.load(fh))
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{exc.lineno}: {exc.msg}") from None
        base_dir = path.parent
    for item in overrides:
        apply_override(cfg, item)
    if seed is not None:
        cfg["seed"] = int(seed)
    cfg["_base_dir"] = os.environ.get(PATH_ENV) or str(base_dir)
    check_config(cfg)
    return cfg


def check_config(cfg: dict) -> None:
    if list(cfg["stages"]) != list(STAGES):
        raise ConfigError(f"stages must be exactly {list(STAGES)} in order")
    m = cfg["mclp"]
    if not m["one_per_zone"] and (m["P"] is None) == (m["alpha"] is None):
        raise ConfigError("set exactly one of mclp.P and mclp.alpha")
    weights = [cfg["demand"]["w_pop"], cfg["demand"]["w_poi"], m["beta_poi"], m["beta_cent"],
               m["beta_cov"]]
    if any(w < 0 for w in weights):
        raise ConfigError("weights must be non-negative")
    if not 0 < cfg["centrality"]["tau"] < 1:
        raise ConfigError("centrality.tau must lie in (0, 1)")
    if m["radius_m"] <= 0 or cfg["voronoi"]["threshold_m"] <= 0:
        raise ConfigError("radii must be positive")
    if cfg["queue"]["convention"] not in ("continuous", "floor"):
        raise ConfigError("queue.convention must be 'continuous' or 'floor'")
    for area, ctype in cfg["queue"]["charger_type_by_area"].items():
        if ctype not in cfg["queue"]["service_rates"]:
            raise ConfigError(f"unknown charger type {ctype!r} for area {area!r}")
    try:
        GridSpec.from_dict(cfg["grid"])
        PoiWeightTable(dict(cfg["demand"]["poi_weights"]))
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def resolve_input(cfg: dict, key: str):
    value = cfg["inputs"].get(key)
    if value is None:
        return None
    p = Path(value)
    return p if p.is_absolute() else Path(cfg.get("_base_dir", ".")) / p


def public(cfg: dict) -> dict:
    """Config without private bookkeeping keys, for serialisation."""
    out = copy.deepcopy(cfg)
    out.pop("_base_dir", None)
    return out


def dumps(cfg: dict) -> str:
    return json.dumps(public(cfg), sort_keys=True, indent=2) + "\n"
