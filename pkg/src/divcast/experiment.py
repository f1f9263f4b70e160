"""Experiment driver: runs one combination method on an observation/panel
pair, scores it against the individual models and a named baseline, and
emits the result files (scores, weight and coefficient trajectories,
cumulative log-score differences, forecasts and predictive draws)."""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .combine import CombinerResult, run_combiner, single_model_result
from .core import (
    ConfigError,
    ForecastSeries,
    InputError,
    NoiseConfig,
    ObservationSeries,
    PredictorPanel,
    default_sigma_obs,
)
from .dataio import FILTER_METHODS, METHODS, GridConfig, RunConfig, write_table
from .filtering import ParticleFilter, FilterOutput
from .latent import ADAPTIVE_TVW, DTVW, TVW, LatentMode
from .metrics import dm_test, loss_series, score_forecasts
from .rng import substream
from .tune import GridSpec, grid_search, make_crps_runner

MODE_BY_METHOD = {"tvw": TVW, "adaptive_tvw": ADAPTIVE_TVW, "dtvw": DTVW}


@dataclass
class MethodRun:
    """Uniform view of one method's output at one horizon."""

    method: str
    kind: str  # "combiner" or "model"
    horizon: int
    forecasts: ForecastSeries
    weights_mean: np.ndarray
    weights_lo: np.ndarray
    weights_hi: np.ndarray
    alpha_mean: np.ndarray | None = None
    alpha_lo: np.ndarray | None = None
    alpha_hi: np.ndarray | None = None


def _noise_config(cfg: RunConfig, obs: ObservationSeries, panel: PredictorPanel) -> NoiseConfig:
    if cfg.sigma_obs is not None:
        sigma = np.atleast_1d(np.asarray(cfg.sigma_obs, dtype=float))
        if sigma.size == 1:
            sigma = np.full(obs.n_vars, sigma[0])
        if sigma.size != obs.n_vars:
            raise ConfigError(f"sigma_obs needs {obs.n_vars} entries, got {sigma.size}")
    else:
        sigma = default_sigma_obs(obs, panel)
    return NoiseConfig(sigma, sigma_x=cfg.sigma_x, sigma_alpha=cfg.sigma_alpha)


def _from_combiner(result: CombinerResult, kind: str) -> MethodRun:
    return MethodRun(
        method=result.method,
        kind=kind,
        horizon=result.forecasts.horizon,
        forecasts=result.forecasts,
        weights_mean=result.weights,
        weights_lo=result.weights,
        weights_hi=result.weights,
    )


def _from_filter(method: str, out: FilterOutput) -> MethodRun:
    return MethodRun(
        method=method,
        kind="combiner",
        horizon=out.horizon,
        forecasts=out.forecasts,
        weights_mean=out.weights_mean,
        weights_lo=out.weights_lo,
        weights_hi=out.weights_hi,
        alpha_mean=out.alpha_mean,
        alpha_lo=out.alpha_lo,
        alpha_hi=out.alpha_hi,
    )


def run_method(
    method: str,
    obs: ObservationSeries,
    panel: PredictorPanel,
    cfg: RunConfig,
    horizon: int,
    noise: NoiseConfig,
    rng_role: str = "filter",
) -> MethodRun:
    """Run one combination method at one horizon."""
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}")
    if method in FILTER_METHODS:
        mode: LatentMode = MODE_BY_METHOD[method]
        pf = ParticleFilter(
            panel,
            mode,
            noise,
            horizon=horizon,
            kappa=cfg.kappa,
            n_pred_draws=cfg.n_pred_draws,
        )
        rng = substream(cfg.seed, rng_role, horizon)
        out = pf.run(
            obs,
            cfg.n_particles,
            np.asarray(cfg.alpha0, dtype=float),
            rng,
            x0_spread=cfg.x0_spread,
        )
        return _from_filter(method, out)
    result = run_combiner(
        method,
        obs,
        panel,
        horizon=horizon,
        window=cfg.window,
        fallback_sigma=cfg.fallback_sigma,
        n_pred_draws=cfg.n_pred_draws,
        seed=cfg.seed,
    )
    return _from_combiner(result, "combiner")


def _eval_window(cfg: RunConfig, horizon: int, T: int) -> tuple[int, int]:
    lo = max(cfg.eval_start or 1, horizon)
    hi = min(cfg.eval_end or T, T)
    if lo > hi:
        raise ConfigError(f"empty evaluation window for horizon {horizon}")
    return lo, hi


def _check_alignment(obs: ObservationSeries, panel: PredictorPanel) -> None:
    if panel.n_vars != obs.n_vars:
        raise InputError(
            f"panel has {panel.n_vars} variables, observations have {obs.n_vars}"
        )
    if panel.variable_names is not None and panel.variable_names != obs.variable_names:
        raise InputError(
            f"panel variables {panel.variable_names} do not match "
            f"observations {obs.variable_names}"
        )
    if panel.n_steps < obs.n_steps:
        raise InputError("panel does not cover the observation range")


def run_experiment(cfg: RunConfig, obs: ObservationSeries, panel: PredictorPanel) -> dict:
    """Execute the configured experiment and write all output files.

    Returns the mapping of logical output names to written paths.
    """
    _check_alignment(obs, panel)
    if max(cfg.horizons) > panel.n_horizons:
        raise ConfigError(
            f"configured horizon {max(cfg.horizons)} exceeds panel horizons {panel.n_horizons}"
        )
    noise = _noise_config(cfg, obs, panel)
    baseline = cfg.baseline or panel.model_names[0]
    if baseline not in panel.model_names and baseline not in METHODS:
        raise ConfigError(f"baseline {baseline!r} is neither a panel model nor a method")

    os.makedirs(cfg.out_dir, exist_ok=True)
    T = obs.n_steps
    score_rows: list[list] = []
    forecast_rows: list[list] = []
    draw_rows: list[list] = []
    cumls_rows: list[list] = []
    weight_rows: list[list] = []
    alpha_rows: list[list] = []
    dm_header = []
    for metric in ("rmsfe", "ls", "crps"):
        dm_header += [f"dm_{metric}_stat", f"dm_{metric}_p"]

    main_runs: dict[int, MethodRun] = {}
    for horizon in cfg.horizons:
        window = _eval_window(cfg, horizon, T)
        runs: list[MethodRun] = []
        for k in range(1, panel.n_models + 1):
            runs.append(
                _from_combiner(
                    single_model_result(obs, panel, k, horizon, cfg.fallback_sigma), "model"
                )
            )
        main = run_method(cfg.method, obs, panel, cfg, horizon, noise)
        main_runs[horizon] = main
        runs.append(main)
        if baseline in panel.model_names:
            base_run = runs[panel.model_names.index(baseline)]
        elif baseline == cfg.method:
            base_run = main
        else:
            base_run = run_method(baseline, obs, panel, cfg, horizon, noise, rng_role="baseline")
            runs.append(base_run)

        base_losses = loss_series(base_run.forecasts, obs, window)
        for run in runs:
            losses = loss_series(run.forecasts, obs, window)
            rows = score_forecasts(run.method, run.forecasts, obs, window)
            for row in rows:
                dm_cells: list = [""] * 6
                var_idx = (
                    obs.variable_names.index(row.variable)
                    if row.variable in obs.variable_names
                    else None
                )
                if run.method != base_run.method and var_idx is not None and row.n_eval >= 10:
                    cells = []
                    for key in ("sq_err", "neg_log_pred", "crps"):
                        dm = dm_test(
                            losses[key][:, var_idx], base_losses[key][:, var_idx], h=horizon
                        )
                        cells += [float(dm.statistic), float(dm.p_value)]
                    dm_cells = cells
                score_rows.append(
                    [
                        row.method,
                        run.kind,
                        row.horizon,
                        row.variable,
                        _nan_blank(row.rmsfe),
                        _nan_blank(row.ls),
                        _nan_blank(row.crps),
                        row.n_eval,
                        *dm_cells,
                        base_run.method,
                    ]
                )

        # Forecast rows, predictive-draw quantiles, and optional draw dump
        # (all targets; the evaluation window only restricts scoring).
        fs = main.forecasts
        q = np.percentile(fs.draws, [2.5, 50.0, 97.5], axis=1)  # (3, S, L)
        for i, s in enumerate(fs.targets):
            for l, name in enumerate(obs.variable_names):
                forecast_rows.append(
                    [
                        int(s),
                        horizon,
                        name,
                        float(fs.point[i, l]),
                        float(fs.log_pred_marginal[i, l]),
                        float(q[0, i, l]),
                        float(q[1, i, l]),
                        float(q[2, i, l]),
                    ]
                )
                if cfg.emit_draws:
                    for j in range(fs.draws.shape[1]):
                        draw_rows.append([int(s), horizon, name, j + 1, float(fs.draws[i, j, l])])

        # Cumulative log-score differences vs the baseline over the window.
        main_l = loss_series(fs, obs, window)
        diff_m = -(main_l["neg_log_pred"] - base_losses["neg_log_pred"])  # (S, L)
        cum_m = np.cumsum(diff_m, axis=0)
        targets_w = main_l["targets"]
        for i, s in enumerate(targets_w):
            for l, name in enumerate(obs.variable_names):
                cumls_rows.append([int(s), horizon, name, float(cum_m[i, l])])
        if obs.n_vars > 1:
            diff_j = -(main_l["neg_log_pred_joint"] - base_losses["neg_log_pred_joint"])
            cum_j = np.cumsum(diff_j)
            for i, s in enumerate(targets_w):
                cumls_rows.append([int(s), horizon, "joint", float(cum_j[i])])

    # Weight / coefficient trajectories from the smallest configured horizon.
    lead = main_runs[min(cfg.horizons)]
    for t in range(1, T + 1):
        for k, model in enumerate(panel.model_names):
            for l, name in enumerate(obs.variable_names):
                weight_rows.append(
                    [
                        t,
                        model,
                        name,
                        float(lead.weights_mean[t - 1, k, l]),
                        float(lead.weights_lo[t - 1, k, l]),
                        float(lead.weights_hi[t - 1, k, l]),
                    ]
                )
    if lead.alpha_mean is not None:
        for t in range(1, T + 1):
            for j, param in enumerate(("alpha0", "alpha1", "alpha2")):
                alpha_rows.append(
                    [
                        t,
                        param,
                        float(lead.alpha_mean[t - 1, j]),
                        float(lead.alpha_lo[t - 1, j]),
                        float(lead.alpha_hi[t - 1, j]),
                    ]
                )

    paths = {}

    def emit(name, header, rows):
        path = os.path.join(cfg.out_dir, name)
        write_table(path, header, rows)
        paths[name] = path

    emit(
        "scores.csv",
        ["method", "kind", "horizon", "variable", "rmsfe", "ls", "crps", "n_eval"]
        + dm_header
        + ["baseline"],
        score_rows,
    )
    emit(
        "forecast.csv",
        ["target", "horizon", "variable", "point", "log_pred", "lo95", "median", "hi95"],
        forecast_rows,
    )
    if cfg.emit_draws:
        emit("draws.csv", ["target", "horizon", "variable", "draw", "value"], draw_rows)
    emit("cumls.csv", ["target", "horizon", "variable", "cum_ls_diff"], cumls_rows)
    emit("weights.csv", ["t", "model", "variable", "mean", "lo95", "hi95"], weight_rows)
    if alpha_rows:
        emit("alphas.csv", ["t", "param", "mean", "lo95", "hi95"], alpha_rows)
    return paths


def _nan_blank(x: float):
    return "" if x != x else float(x)


def run_grid_search(
    cfg: RunConfig,
    grid: GridConfig,
    obs: ObservationSeries,
    panel: PredictorPanel,
    n_workers: int = 1,
) -> tuple[np.ndarray, list]:
    """Two-stage (or one-stage) initialization search minimizing CRPS."""
    _check_alignment(obs, panel)
    noise = _noise_config(cfg, obs, panel)
    horizon = min(cfg.horizons)
    window = _eval_window(cfg, horizon, obs.n_steps)
    variable = None
    if grid.variable is not None:
        if grid.variable not in obs.variable_names:
            raise ConfigError(f"unknown variable {grid.variable!r}")
        variable = obs.variable_names.index(grid.variable)
    runner = make_crps_runner(
        obs,
        panel,
        cfg=noise,
        horizon=horizon,
        n_particles=grid.grid_particles or max(1, cfg.n_particles // 4),
        kappa=cfg.kappa,
        eval_draws=grid.eval_draws,
        x0_spread=cfg.x0_spread,
        eval_window=window,
        variable=variable,
        sigma_x=cfg.sigma_x,
        sigma_alpha=cfg.sigma_alpha,
    )
    spec = GridSpec(
        stage1=(
            (grid.stage1_lo, grid.stage1_hi, grid.stage1_step),
            (grid.stage1_lo, grid.stage1_hi, grid.stage1_step),
        ),
        stage2_step=grid.stage2_step,
        stage2_margin=grid.stage2_margin,
        stage2_bounds=grid.stage2_bounds,
        eval_draws=grid.eval_draws,
    )
    return grid_search(spec, runner, seed=cfg.seed, n_workers=n_workers)


def _load_forecast_dir(directory: str, obs: ObservationSeries) -> dict[int, ForecastSeries]:
    """Rebuild per-horizon forecast blocks from an emitted run directory.

    Joint log predictives are not recoverable from the per-variable files,
    so file-based scoring reports marginal log scores only.
    """
    import csv as _csv

    forecast_path = os.path.join(directory, "forecast.csv")
    draws_path = os.path.join(directory, "draws.csv")
    points: dict[int, dict[int, dict[str, tuple[float, float]]]] = {}
    with open(forecast_path, newline="") as fh:
        for row in _csv.DictReader(fh):
            h, s = int(row["horizon"]), int(row["target"])
            points.setdefault(h, {}).setdefault(s, {})[row["variable"]] = (
                float(row["point"]),
                float(row["log_pred"]),
            )
    draw_map: dict[int, dict[int, dict[str, list[float]]]] = {}
    with open(draws_path, newline="") as fh:
        for row in _csv.DictReader(fh):
            h, s = int(row["horizon"]), int(row["target"])
            draw_map.setdefault(h, {}).setdefault(s, {}).setdefault(row["variable"], []).append(
                float(row["value"])
            )
    out: dict[int, ForecastSeries] = {}
    for h, per_target in sorted(points.items()):
        targets = np.array(sorted(per_target), dtype=int)
        L = obs.n_vars
        point = np.empty((len(targets), L))
        log_pred_marginal = np.empty((len(targets), L))
        first = draw_map[h][targets[0]][obs.variable_names[0]]
        draws = np.empty((len(targets), len(first), L))
        for i, s in enumerate(targets):
            for l, name in enumerate(obs.variable_names):
                point[i, l], log_pred_marginal[i, l] = per_target[s][name]
                draws[i, :, l] = draw_map[h][s][name]
        out[h] = ForecastSeries(
            horizon=h,
            targets=targets,
            point=point,
            log_pred=np.full(len(targets), np.nan),
            log_pred_marginal=log_pred_marginal,
            draws=draws,
        )
    return out


def score_runs(obs: ObservationSeries, named_dirs: list[tuple[str, str]]) -> tuple[list[str], list[list]]:
    """Score emitted forecast directories against observations, with DM
    comparisons of every run to the first-listed one."""
    header = ["method", "horizon", "variable", "rmsfe", "ls", "crps", "n_eval"]
    for metric in ("rmsfe", "ls", "crps"):
        header += [f"dm_{metric}_stat", f"dm_{metric}_p"]
    header.append("baseline")
    loaded = [(name, _load_forecast_dir(directory, obs)) for name, directory in named_dirs]
    base_name = loaded[0][0]
    rows: list[list] = []
    for name, by_horizon in loaded:
        for h, fs in sorted(by_horizon.items()):
            window = None
            base_fs = loaded[0][1].get(h)
            losses = loss_series(fs, obs, window)
            base_losses = loss_series(base_fs, obs, window) if base_fs is not None else None
            for row in score_forecasts(name, fs, obs, window):
                dm_cells: list = [""] * 6
                var_idx = (
                    obs.variable_names.index(row.variable)
                    if row.variable in obs.variable_names
                    else None
                )
                if (
                    name != base_name
                    and base_losses is not None
                    and var_idx is not None
                    and row.n_eval >= 10
                    and np.array_equal(losses["targets"], base_losses["targets"])
                ):
                    cells = []
                    for key in ("sq_err", "neg_log_pred", "crps"):
                        dm = dm_test(losses[key][:, var_idx], base_losses[key][:, var_idx], h=h)
                        cells += [float(dm.statistic), float(dm.p_value)]
                    dm_cells = cells
                rows.append(
                    [
                        row.method,
                        row.horizon,
                        row.variable,
                        _nan_blank(row.rmsfe),
                        _nan_blank(row.ls),
                        _nan_blank(row.crps),
                        row.n_eval,
                        *dm_cells,
                        base_name,
                    ]
                )
    return header, rows


def build_report(score_files: list[str]) -> tuple[list[str], list[list]]:
    """Merge score files into one comparison table: rows are
    (horizon, variable, metric), columns are methods with individual models
    on the left and combiners on the right."""
    import csv as _csv

    entries: dict[tuple, dict] = {}
    model_order: list[str] = []
    combiner_order: list[str] = []
    for path in score_files:
        with open(path, newline="") as fh:
            for row in _csv.DictReader(fh):
                method = row["method"]
                kind = row.get("kind", "combiner")
                order = model_order if kind == "model" else combiner_order
                if method not in order:
                    order.append(method)
                for metric in ("rmsfe", "ls", "crps"):
                    key = (int(row["horizon"]), row["variable"], metric)
                    entries.setdefault(key, {})
                    if method not in entries[key] and row[metric] != "":
                        entries[key][method] = row[metric]
    combiners = [m for m in METHODS if m in combiner_order]
    combiners += [m for m in combiner_order if m not in combiners]
    methods = model_order + combiners
    header = ["horizon", "variable", "metric"] + methods
    rows = []
    for key in sorted(entries, key=lambda k: (k[0], k[1], ("rmsfe", "ls", "crps").index(k[2]))):
        horizon, variable, metric = key
        rows.append([horizon, variable, metric] + [entries[key].get(m, "") for m in methods])
    return header, rows
