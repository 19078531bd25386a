"""Config files, dataset loading and trace/report writers."""

from __future__ import annotations

import csv
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np
import yaml

from .core import TRACE_COLUMNS, SolverConfig, Trace
from .errors import ConfigError, LoadError

__all__ = [
    "load_dataset",
    "load_config",
    "ExperimentConfig",
    "solver_config",
    "write_trace",
    "write_json",
    "resolve_seed",
]


# ---------------------------------------------------------------------------
# datasets


def _parse_cell(text: str, row: int, col: int, path) -> float:
    try:
        v = float(text)
    except ValueError:
        raise LoadError(f"{path}: row {row}, column {col}: cannot parse {text.strip()!r} as a number") from None
    if not math.isfinite(v):
        raise LoadError(f"{path}: row {row}, column {col}: non-finite value {text.strip()!r}")
    return v


def _read_rows(path) -> list[list[float]]:
    p = Path(path)
    if not p.is_file():
        raise LoadError(f"no such file: {path}")
    rows = []
    with p.open(newline="") as fh:
        for i, raw in enumerate(csv.reader(fh), start=1):
            if not raw or all(not c.strip() for c in raw):
                continue
            rows.append([_parse_cell(c, i, j, path) for j, c in enumerate(raw, start=1)])
    if not rows:
        raise LoadError(f"{path}: file is empty")
    width = len(rows[0])
    for i, r in enumerate(rows, start=1):
        if len(r) != width:
            raise LoadError(f"{path}: row {i} has {len(r)} columns, expected {width}")
    return rows


def load_dataset(path, kind: str):
    """Read a header-free CSV.

    ``kind`` is ``classification`` (rows ``label,feat1,...``; labels must be
    -1 or +1), ``matrix`` (dense rows) or ``vector`` (one value per line).
    Row and column numbers in error messages are 1-based.
    """
    from .problems import ClassificationData

    rows = _read_rows(path)
    if kind == "matrix":
        return np.array(rows)
    if kind == "vector":
        if len(rows[0]) != 1:
            raise LoadError(f"{path}: vector files need one value per line, got {len(rows[0])} columns")
        return np.array([r[0] for r in rows])
    if kind == "classification":
        if len(rows[0]) < 2:
            raise LoadError(f"{path}: need a label and at least one feature per row")
        arr = np.array(rows)
        bad = np.nonzero((arr[:, 0] != 1) & (arr[:, 0] != -1))[0]
        if bad.size:
            raise LoadError(f"{path}: row {bad[0] + 1}, column 1: label {arr[bad[0], 0]:g} is not -1 or +1")
        return ClassificationData(arr[:, 0], arr[:, 1:])
    raise ConfigError(f"unknown dataset kind {kind!r}")


# ---------------------------------------------------------------------------
# configs


_SECTIONS = {"problem", "distance", "solver", "output", "compare", "sample", "certificate", "expect"}
_SOLVER_KEYS = {"beta", "sigma", "p_min", "p", "max_outer_iters", "max_inner_iters", "tol_residual", "tol_step"}


@dataclass
class ExperimentConfig:
    """Parsed config file; ``base`` is the directory of the file (for relative paths)."""

    raw: dict
    base: Path
    path: Path
    problem: dict = field(default_factory=dict)
    distance: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)

    def resolve(self, rel: str) -> Path:
        p = Path(rel)
        return p if p.is_absolute() else self.base / p

    def section(self, name: str) -> dict:
        value = self.raw.get(name, {})
        if value is None:
            return {}
        if not isinstance(value, dict):
            raise ConfigError(f"section {name!r} must be a mapping")
        return value


def load_config(path) -> ExperimentConfig:
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"no such config file: {path}")
    try:
        raw = yaml.safe_load(p.read_text())
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    unknown = set(raw) - _SECTIONS
    if unknown:
        raise ConfigError(f"{path}: unknown section(s) {sorted(unknown)}")
    cfg = ExperimentConfig(raw=raw, base=p.resolve().parent, path=p)
    cfg.problem = cfg.section("problem")
    cfg.distance = cfg.section("distance")
    cfg.solver = cfg.section("solver")
    cfg.output = cfg.section("output")
    return cfg


def solver_config(section: dict) -> SolverConfig:
    """Build a :class:`SolverConfig`; ``p`` may be a constant merit weight."""
    unknown = set(section) - _SOLVER_KEYS
    if unknown:
        raise ConfigError(f"unknown solver option(s) {sorted(unknown)}")
    kw: dict[str, Any] = {}
    for key in ("beta", "sigma", "p_min", "tol_residual", "tol_step"):
        if key in section:
            kw[key] = _number(section[key], key)
    for key in ("max_outer_iters", "max_inner_iters"):
        if key in section:
            kw[key] = int(_number(section[key], key))
    if "p" in section:
        p = _number(section["p"], "p")
        kw.setdefault("p_min", p)
        kw["p_schedule"] = lambda k, p=p: p
    return SolverConfig(**kw)


def _number(v, name) -> float:
    try:
        return float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number, got {v!r}") from None


def resolve_seed(cli_seed: Optional[int], config_seed) -> int:
    """``--seed`` beats ``GVDPGM_SEED`` beats the config value (default 0)."""
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get("GVDPGM_SEED")
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"GVDPGM_SEED must be an integer, got {env!r}") from None
    return int(config_seed or 0)


# ---------------------------------------------------------------------------
# writers


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    v = float(v)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return format(v, ".17g")


def write_trace(trace: Trace, path, timing: bool = False) -> None:
    """CSV with header ``k,F_x,...,wall_ms`` and 17 significant digits.

    ``wall_ms`` is written as 0 unless ``timing`` is set, so repeated runs
    produce byte-identical files.
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        fh.write(",".join(TRACE_COLUMNS) + "\n")
        for rec in trace.records:
            row = list(rec.row())
            if not timing:
                row[-1] = 0.0
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, Path):
        return str(obj)
    return obj


def write_json(data: dict, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(data), indent=2, sort_keys=True) + "\n")
