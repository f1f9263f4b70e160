"""CSV interchange formats and experiment configuration.

Two long-format inputs drive every run:

* observations: header ``t,variable,value`` — one row per (t, variable),
  t contiguous from 1, variable order fixed by first occurrence.
* panel: header ``t,model,variable,horizon,draw,value`` — dense over
  models, variables, horizons 1..H and draws 1..D for every t.

Floats are written with Python's shortest round-trip representation, so a
load/emit cycle reproduces values bit-exactly.
"""

from __future__ import annotations

import configparser
import csv
import os
from dataclasses import dataclass, fields

import numpy as np

from .core import ConfigError, DataFormatError, ObservationSeries, PredictorPanel

METHODS = ("equal", "bma", "bma_roll", "tvw", "adaptive_tvw", "dtvw")
FILTER_METHODS = ("tvw", "adaptive_tvw", "dtvw")

OBS_HEADER = ["t", "variable", "value"]
PANEL_HEADER = ["t", "model", "variable", "horizon", "draw", "value"]


def _fmt(x) -> str:
    return repr(float(x))


def _read_rows(path: str, header: list[str]) -> list[dict]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != header:
            raise DataFormatError(
                f"{path}: expected header {','.join(header)}, got "
                f"{','.join(reader.fieldnames or [])}"
            )
        return list(reader)


def _parse_float(raw: str, path: str, line: int, column: str) -> float:
    try:
        value = float(raw)
    except ValueError:
        raise DataFormatError(f"{path}:{line}: non-numeric {column} {raw!r}") from None
    if not np.isfinite(value):
        raise DataFormatError(f"{path}:{line}: non-finite {column} {raw!r}")
    return value


def _parse_int(raw: str, path: str, line: int, column: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise DataFormatError(f"{path}:{line}: non-integer {column} {raw!r}") from None


def load_observations(path: str) -> ObservationSeries:
    """Read an observation series, validating contiguity and completeness."""
    rows = _read_rows(path, OBS_HEADER)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    variables: list[str] = []
    cells: dict[tuple[int, str], float] = {}
    for i, row in enumerate(rows, start=2):
        t = _parse_int(row["t"], path, i, "t")
        name = row["variable"]
        if name not in variables:
            variables.append(name)
        key = (t, name)
        if key in cells:
            raise DataFormatError(f"{path}:{i}: duplicate entry for t={t}, variable={name!r}")
        cells[key] = _parse_float(row["value"], path, i, "value")
    times = sorted({t for t, _ in cells})
    T = times[-1]
    if times[0] != 1 or times != list(range(1, T + 1)):
        raise DataFormatError(f"{path}: time index must be contiguous from 1 (got {times[:5]}...)")
    values = np.empty((T, len(variables)))
    for t in range(1, T + 1):
        for l, name in enumerate(variables):
            if (t, name) not in cells:
                raise DataFormatError(f"{path}: missing value for t={t}, variable={name!r}")
            values[t - 1, l] = cells[(t, name)]
    return ObservationSeries(values, tuple(variables))


def save_observations(obs: ObservationSeries, path: str) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(OBS_HEADER)
        for t in range(1, obs.n_steps + 1):
            for l, name in enumerate(obs.variable_names):
                writer.writerow([t, name, _fmt(obs.values[t - 1, l])])


def load_panel(path: str) -> PredictorPanel:
    """Read a predictor panel, validating dense (t, model, variable,
    horizon, draw) coverage; model/variable order follows first occurrence."""
    rows = _read_rows(path, PANEL_HEADER)
    if not rows:
        raise DataFormatError(f"{path}: no data rows")
    models: list[str] = []
    variables: list[str] = []
    cells: dict[tuple, float] = {}
    max_t = max_h = max_d = 0
    for i, row in enumerate(rows, start=2):
        t = _parse_int(row["t"], path, i, "t")
        h = _parse_int(row["horizon"], path, i, "horizon")
        d = _parse_int(row["draw"], path, i, "draw")
        if min(t, h, d) < 1:
            raise DataFormatError(f"{path}:{i}: indices must be >= 1")
        if row["model"] not in models:
            models.append(row["model"])
        if row["variable"] not in variables:
            variables.append(row["variable"])
        key = (t, row["model"], row["variable"], h, d)
        if key in cells:
            raise DataFormatError(
                f"{path}:{i}: duplicate draw for t={t}, model={row['model']!r}, "
                f"variable={row['variable']!r}, horizon={h}, draw={d}"
            )
        cells[key] = _parse_float(row["value"], path, i, "value")
        max_t, max_h, max_d = max(max_t, t), max(max_h, h), max(max_d, d)
    draws = np.empty((max_t, len(models), len(variables), max_h, max_d))
    missing = []
    for t in range(1, max_t + 1):
        for k, m in enumerate(models):
            for l, v in enumerate(variables):
                for h in range(1, max_h + 1):
                    for d in range(1, max_d + 1):
                        key = (t, m, v, h, d)
                        if key not in cells:
                            missing.append(f"(t={t}, model={m}, variable={v}, horizon={h}, draw={d})")
                        else:
                            draws[t - 1, k, l, h - 1, d - 1] = cells[key]
    if missing:
        shown = ", ".join(missing[:5])
        more = "" if len(missing) <= 5 else f" and {len(missing) - 5} more"
        raise DataFormatError(f"{path}: ragged panel, missing cells {shown}{more}")
    return PredictorPanel(draws, tuple(models), tuple(variables))


def save_panel(panel: PredictorPanel, path: str, variable_names: tuple[str, ...] | None = None) -> None:
    names = variable_names or panel.variable_names
    if names is None:
        names = ("y",) if panel.n_vars == 1 else tuple(f"y{l+1}" for l in range(panel.n_vars))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(PANEL_HEADER)
        for t in range(1, panel.n_steps + 1):
            for k, model in enumerate(panel.model_names):
                for l, var in enumerate(names):
                    for h in range(1, panel.n_horizons + 1):
                        for d in range(1, panel.n_draws + 1):
                            writer.writerow(
                                [t, model, var, h, d, _fmt(panel.draws[t - 1, k, l, h - 1, d - 1])]
                            )


def write_table(path: str, header: list[str], rows: list[list]) -> None:
    """Write a generic output table; floats get round-trip formatting."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow(
                [_fmt(x) if isinstance(x, (float, np.floating)) else x for x in row]
            )


@dataclass
class RunConfig:
    """Everything one experiment needs; mirrors the config file keys."""

    method: str
    observations: str
    panel: str
    horizons: tuple[int, ...] = (1,)
    n_particles: int = 1000
    kappa: float = 0.5
    seed: int = 0
    n_pred_draws: int = 1000
    sigma_obs: tuple[float, ...] | None = None
    sigma_x: float = 0.25
    sigma_alpha: float = 0.05
    alpha0: tuple[float, float, float] = (0.0, 0.0, 0.0)
    x0_spread: float = 0.0
    window: int | None = None
    fallback_sigma: float = 0.1
    eval_start: int | None = None
    eval_end: int | None = None
    baseline: str | None = None
    out_dir: str = "out"
    emit_draws: bool = True

    def __post_init__(self):
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.method == "bma_roll" and self.window is None:
            raise ConfigError("bma_roll requires a window")
        if not 0 < self.kappa <= 1:
            raise ConfigError("ess_threshold must lie in (0, 1]")
        if self.n_particles < 1:
            raise ConfigError("n_particles must be >= 1")
        if any(h < 1 for h in self.horizons) or not self.horizons:
            raise ConfigError("horizons must be a non-empty list of positive integers")
        if len(self.alpha0) != 3:
            raise ConfigError("alpha0 must have three components")


@dataclass
class GridConfig:
    """Grid-search settings layered on top of a RunConfig."""

    stage1_lo: float = -10.0
    stage1_hi: float = 10.0
    stage1_step: float = 2.0
    stage2_step: float | None = 0.5
    stage2_margin: int = 1
    stage2_bounds: tuple[tuple[float, float], tuple[float, float]] | None = None
    eval_draws: int = 10
    grid_particles: int | None = None  # default: n_particles // 4
    variable: str | None = None


def _parse_floats(raw: str) -> tuple[float, ...]:
    return tuple(float(x) for x in raw.replace(",", " ").split())


def _parse_ints(raw: str) -> tuple[int, ...]:
    return tuple(int(x) for x in raw.replace(",", " ").split())


def load_config(path: str, overrides: dict | None = None) -> tuple[RunConfig, GridConfig]:
    """Parse an INI-style config file; overrides (from CLI flags) win."""
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from exc

    def get(section, key, default=None):
        if parser.has_option(section, key):
            value = parser.get(section, key).strip()
            return value if value else default
        return default

    values: dict = {}
    values["observations"] = get("data", "observations")
    values["panel"] = get("data", "panel")
    values["method"] = get("run", "method", "equal")
    if get("run", "horizons"):
        values["horizons"] = _parse_ints(get("run", "horizons"))
    for key, cast in [
        ("n_particles", int),
        ("seed", int),
        ("n_pred_draws", int),
        ("eval_start", int),
        ("eval_end", int),
    ]:
        if get("run", key) is not None:
            values[key] = cast(get("run", key))
    if get("run", "ess_threshold") is not None:
        values["kappa"] = float(get("run", "ess_threshold"))
    if get("run", "baseline") is not None:
        values["baseline"] = get("run", "baseline")
    if get("run", "out_dir") is not None:
        values["out_dir"] = get("run", "out_dir")
    if get("run", "emit_draws") is not None:
        values["emit_draws"] = parser.getboolean("run", "emit_draws")

    if get("noise", "sigma_obs") is not None:
        values["sigma_obs"] = _parse_floats(get("noise", "sigma_obs"))
    for key in ("sigma_x", "sigma_alpha"):
        if get("noise", key) is not None:
            values[key] = float(get("noise", key))

    method = overrides.get("method") if overrides and overrides.get("method") else values["method"]
    if parser.has_section(method):
        if get(method, "alpha0") is not None:
            values["alpha0"] = _parse_floats(get(method, "alpha0"))
        for key in ("x0_spread", "fallback_sigma"):
            if get(method, key) is not None:
                values[key] = float(get(method, key))
        if get(method, "window") is not None:
            values["window"] = int(get(method, "window"))

    if overrides:
        known = {f.name for f in fields(RunConfig)}
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in known:
                raise ConfigError(f"unknown config override {key!r}")
            values[key] = value

    if not values.get("observations") or not values.get("panel"):
        raise ConfigError(f"{path}: [data] must name observations and panel files")

    grid = GridConfig()
    if parser.has_section("gridsearch"):
        if get("gridsearch", "stage1") is not None:
            lo, hi, step = _parse_floats(get("gridsearch", "stage1"))
            grid.stage1_lo, grid.stage1_hi, grid.stage1_step = lo, hi, step
        if get("gridsearch", "stage2_step") is not None:
            raw = get("gridsearch", "stage2_step")
            grid.stage2_step = None if raw.lower() == "none" else float(raw)
        if get("gridsearch", "stage2_bounds") is not None:
            vals = _parse_floats(get("gridsearch", "stage2_bounds"))
            if len(vals) != 4:
                raise ConfigError("stage2_bounds expects lo1, hi1, lo2, hi2")
            grid.stage2_bounds = ((vals[0], vals[1]), (vals[2], vals[3]))
        for key, cast in [("stage2_margin", int), ("eval_draws", int), ("grid_particles", int)]:
            if get("gridsearch", key) is not None:
                setattr(grid, key, cast(get("gridsearch", key)))
        if get("gridsearch", "variable") is not None:
            grid.variable = get("gridsearch", "variable")

    try:
        cfg = RunConfig(**values)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg, grid
