"""Measure configuration files and point-cloud CSV input."""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .errors import ArgumentError, ConfigError
from .measures import EmpiricalMeasure, Lebesgue, MeasureOracle, SelfSimilarMeasure, pushforward
from .qsmaps import PowerMap


def read_pointcloud(path) -> EmpiricalMeasure:
    """Read a CSV with header ``x,weight`` or ``x,y,weight``."""
    path = Path(path)
    try:
        with path.open(newline="") as fh:
            rows = list(csv.DictReader(fh))
    except OSError as exc:
        raise ConfigError(f"cannot read point cloud {path}: {exc}") from exc
    if not rows:
        raise ConfigError(f"point cloud {path} has no rows")
    header = [h.strip() for h in rows[0].keys()]
    if "weight" not in header or "x" not in header:
        raise ConfigError("point cloud needs columns x[,y],weight")
    cols = ["x", "y"] if "y" in header else ["x"]
    try:
        pts = np.array([[float(r[c]) for c in cols] for r in rows])
        w = np.array([float(r["weight"]) for r in rows])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"non-numeric entry in {path}") from exc
    if np.any(~(w > 0)):
        raise ConfigError("point-cloud weights must be strictly positive")
    try:
        return EmpiricalMeasure(pts, w)
    except ArgumentError as exc:
        raise ConfigError(str(exc)) from exc


def measure_from_config(cfg: dict, base_dir=".") -> MeasureOracle:
    """Build a measure from a parsed configuration mapping.

    Kinds: ``lebesgue`` (optional ``interval``), ``ifs1d`` (``branches`` as
    ``[ratio, shift, prob]`` triples), ``pointcloud`` (``path`` relative to the
    config file) and ``pushforward-power`` (``gamma`` and a nested ``base``).
    """
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ConfigError("measure config must be an object with a 'kind'")
    kind = cfg["kind"]
    try:
        if kind == "lebesgue":
            a, b = cfg.get("interval", [0.0, 1.0])
            return Lebesgue(float(a), float(b))
        if kind == "ifs1d":
            return SelfSimilarMeasure([tuple(map(float, br)) for br in cfg["branches"]])
        if kind == "pointcloud":
            return read_pointcloud(Path(base_dir) / cfg["path"])
        if kind == "pushforward-power":
            return pushforward(measure_from_config(cfg["base"], base_dir), PowerMap(float(cfg["gamma"])))
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"invalid {kind} config: {exc}") from exc
    raise ConfigError(f"unknown measure kind {kind!r}")


def load_json(path) -> dict:
    path = Path(path)
    try:
        return json.loads(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def load_measure(path) -> tuple[MeasureOracle, dict]:
    """Measure and its parsed config from a JSON file."""
    cfg = load_json(path)
    return measure_from_config(cfg, Path(path).parent), cfg
