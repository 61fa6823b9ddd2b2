"""Scenario and run configuration: JSON canonical, TOML accepted.

The schema is versioned; unknown keys are rejected early so sweeps fail
before burning grid time.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Dict

from .content import ExponentialCoverage, OverlapSegment, PiecewiseLinearCap, Tabulated
from .game import (
    ConstantCost,
    Homogeneous,
    LinearCost,
    PathNetwork,
    Scenario,
    TwoType,
    UniformContinuous,
)

SCHEMA_VERSION = 1


class ConfigError(ValueError):
    def __init__(self, message: str, path: str = ""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


def load_config(path: str | Path) -> Dict[str, Any]:
    path = Path(path)
    if not path.exists():
        raise ConfigError("config file not found", str(path))
    text = path.read_text()
    if path.suffix.lower() == ".toml":
        try:
            import tomllib  # Python >= 3.11
        except ModuleNotFoundError:  # pragma: no cover - version dependent
            import tomli as tomllib
        try:
            data = tomllib.loads(text)
        except Exception as exc:
            raise ConfigError(f"TOML parse error: {exc}", str(path))
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"JSON parse error at line {exc.lineno}: {exc.msg}", str(path))
    if not isinstance(data, dict):
        raise ConfigError("top-level config must be a table/object", str(path))
    if data.get("schema") != SCHEMA_VERSION:
        raise ConfigError(f"missing or unsupported schema version (expected {SCHEMA_VERSION})")
    return data


def _require(d: dict, key: str, where: str):
    if key not in d:
        raise ConfigError(f"missing key {key!r}", where)
    return d[key]


def content_from_config(d: dict, where: str = "content"):
    kind = _require(d, "kind", where)
    try:
        if kind == "exponential":
            return ExponentialCoverage(
                float(_require(d, "N", where)),
                float(_require(d, "n", where)),
                float(_require(d, "phi", where)),
                int(d.get("K", 2)),
            )
        if kind == "piecewise":
            return PiecewiseLinearCap(float(_require(d, "q", where)), float(d.get("knee", 0.5)))
        if kind == "tabulated":
            pts = _require(d, "points", where)
            return Tabulated(tuple((float(x), float(v)) for x, v in pts))
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid content parameters: {exc}", where)
    raise ConfigError(f"unknown content kind {kind!r}", where)


def types_from_config(d: dict, where: str = "types"):
    kind = _require(d, "kind", where)
    try:
        if kind == "homogeneous":
            return Homogeneous(float(_require(d, "theta0", where)))
        if kind == "two_type":
            theta1 = float(_require(d, "theta1", where))
            if "theta2" in d:
                theta2 = float(d["theta2"])
            elif "theta0" in d:  # hold the mean fixed while sweeping theta1
                theta2 = 2.0 * float(d["theta0"]) - theta1
            else:
                raise ConfigError("two_type needs theta2 or theta0", where)
            return TwoType(theta1, theta2, float(d.get("eta", 0.5)))
        if kind == "uniform":
            return UniformContinuous()
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid type parameters: {exc}", where)
    raise ConfigError(f"unknown types kind {kind!r}", where)


def scenario_from_config(d: dict) -> Scenario:
    where = "scenario"
    if not isinstance(d, dict):
        raise ConfigError("scenario must be a table/object", where)
    k = int(d.get("K", 2))
    c_h = float(d.get("c_H", 0.0))
    content = content_from_config(_require(d, "content", where), f"{where}.content")
    types = types_from_config(_require(d, "types", where), f"{where}.types")
    overlap = None
    if "overlap" in d:
        o = d["overlap"]
        try:
            overlap = OverlapSegment(float(o["N0"]), float(o["n"]), float(o["phi"]))
        except Exception as exc:
            raise ConfigError(f"invalid overlap: {exc}", f"{where}.overlap")
    cost = ConstantCost()
    if "cost" in d:
        c = d["cost"]
        kind = c.get("kind", "constant")
        if kind == "linear":
            try:
                cost = LinearCost(
                    float(c.get("c_L", 0.0)),
                    float(c.get("b_L", 0.0)),
                    float(c.get("c_H", c_h)),
                    float(c.get("b_H", 0.0)),
                )
            except Exception as exc:
                raise ConfigError(f"invalid cost model: {exc}", f"{where}.cost")
            c_h = cost.c_h
        elif kind != "constant":
            raise ConfigError(f"unknown cost kind {kind!r}", f"{where}.cost")
    try:
        network = PathNetwork.canonical(c_h) if k == 2 else PathNetwork.multipath(k, c_h)
        return Scenario(
            network=network,
            types=types,
            content=content,
            overlap=overlap,
            cost_model=cost,
            beta=float(d["beta"]) if "beta" in d else None,
        )
    except ConfigError:
        raise
    except Exception as exc:
        raise ConfigError(f"invalid scenario: {exc}", where)


def set_by_path(d: dict, dotted: str, value) -> None:
    """Assign ``value`` at a dotted key path, e.g. ``scenario.types.theta1``."""
    keys = dotted.split(".")
    cur = d
    for key in keys[:-1]:
        if key not in cur or not isinstance(cur[key], dict):
            raise ConfigError(f"unknown parameter path {dotted!r}")
        cur = cur[key]
    if keys[-1] not in cur:
        raise ConfigError(f"unknown parameter path {dotted!r}")
    cur[keys[-1]] = value
