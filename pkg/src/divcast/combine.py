"""Non-filter combination baselines under a common result shape: equal
weighting, recursive Bayesian model averaging on cumulative log predictive
likelihoods, and its rolling-window variant.  Individual panel models are
exposed through the same interface (as degenerate one-hot combinations) so
score tables can mix models and combiners.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    ForecastSeries,
    InputError,
    ObservationSeries,
    PredictorPanel,
    gaussian_logpdf_diag,
)
from .filtering import _logsumexp, systematic_resample
from .rng import substream

VAR_FLOOR = 1e-8


@dataclass
class CombinerResult:
    """Per-time combination weights (identical across variables for these
    baselines) plus the out-of-sample forecast block at one horizon."""

    method: str
    times: np.ndarray
    weights: np.ndarray  # (T, K, L)
    forecasts: ForecastSeries


def _gaussian_fit(panel: PredictorPanel, fallback_sigma: float) -> tuple[np.ndarray, np.ndarray]:
    """Moment-fit a diagonal Gaussian to every panel cell.

    Returns means and standard deviations of shape (T, K, L, H).  With a
    single draw, or a degenerate draw spread, the configured fallback
    bandwidth acts as the standard deviation; otherwise the sample variance
    is floored at 1e-8.
    """
    if fallback_sigma <= 0:
        raise InputError("fallback_sigma must be positive")
    mu = panel.draws.mean(axis=4)
    if panel.n_draws >= 2:
        var = panel.draws.var(axis=4, ddof=1)
        sd = np.where(var == 0.0, fallback_sigma, np.sqrt(np.maximum(var, VAR_FLOOR)))
    else:
        sd = np.full_like(mu, fallback_sigma)
    return mu, sd


def model_log_predictive(
    panel: PredictorPanel,
    obs: ObservationSeries,
    t: int,
    k: int,
    fallback_sigma: float = 0.1,
) -> float:
    """Joint log density of the realized y_t under model k's one-step
    predictive Gaussian (variables independent)."""
    mu, sd = _gaussian_fit(panel, fallback_sigma)
    y = obs.values[t - 1]
    return float(gaussian_logpdf_diag(y, mu[t - 1, k - 1, :, 0], sd[t - 1, k - 1, :, 0]))


def model_log_predictive_matrix(
    panel: PredictorPanel,
    obs: ObservationSeries,
    fallback_sigma: float = 0.1,
    horizon: int = 1,
) -> tuple[np.ndarray, np.ndarray]:
    """Per-variable and joint log predictives of every model at every target
    time: returns (T, K) joint and (T, K, L) marginal arrays."""
    mu, sd = _gaussian_fit(panel, fallback_sigma)
    T = obs.n_steps
    m = mu[:T, :, :, horizon - 1]
    s = sd[:T, :, :, horizon - 1]
    r = (obs.values[:, None, :] - m) / s
    with np.errstate(over="ignore"):
        marginal = -0.5 * (np.log(2.0 * np.pi * s**2) + r**2)
    return marginal.sum(axis=2), marginal


def bma_weights(log_pred_per_model: np.ndarray, window: int | None = None) -> np.ndarray:
    """Recursive model-averaging weights from per-step log predictive scores.

    Row t is the softmax over models of the summed scores in the trailing
    window ending at t-1 (the full sample 1..t-1 when window is None), so
    weights at t never touch data from t onward.  Row 1 is uniform.
    """
    lp = np.asarray(log_pred_per_model, dtype=float)
    if lp.ndim != 2:
        raise InputError("log predictive scores must be a (T, K) matrix")
    if not np.all(np.isfinite(lp)):
        raise InputError("log predictive scores must be finite")
    if window is not None and window < 1:
        raise InputError("window must be >= 1")
    T, K = lp.shape
    out = np.empty((T, K))
    cum = np.vstack([np.zeros(K), np.cumsum(lp, axis=0)])  # cum[t] = sum of rows < t
    for t in range(T):
        lo = 0 if window is None else max(0, t - window)
        scores = cum[t] - cum[lo]
        z = np.exp(scores - scores.max())
        out[t] = z / z.sum()
    return out


def _combined_forecasts(
    panel: PredictorPanel,
    obs: ObservationSeries,
    weight_rows: np.ndarray,
    horizon: int,
    mu: np.ndarray,
    sd: np.ndarray,
    draws_fn,
) -> ForecastSeries:
    """Assemble the forecast block for target times h..T: the forecast of
    target s uses the weight row at s-h+1 (information through s-h)."""
    T, L = obs.n_steps, obs.n_vars
    targets = np.arange(horizon, T + 1)
    rows = targets - horizon  # 0-based weight row index s-h+1 -> (s-h+1)-1
    w = weight_rows[rows]  # (S, K)
    m = mu[targets - 1, :, :, horizon - 1]  # (S, K, L)
    s_ = sd[targets - 1, :, :, horizon - 1]
    point = np.einsum("sk,skl->sl", w, m)
    y = obs.values[targets - 1]
    r = (y[:, None, :] - m) / s_
    with np.errstate(over="ignore"):
        comp_marg = -0.5 * (np.log(2.0 * np.pi * s_**2) + r**2)  # (S, K, L)
    with np.errstate(divide="ignore"):
        logw = np.where(w > 0, np.log(w), -np.inf)
    log_pred = _logsumexp(logw + comp_marg.sum(axis=2), axis=1)
    log_pred_marginal = np.stack(
        [_logsumexp(logw + comp_marg[:, :, l], axis=1) for l in range(L)], axis=1
    )
    draws = draws_fn(targets, w)
    return ForecastSeries(
        horizon=horizon,
        targets=targets,
        point=point,
        log_pred=log_pred,
        log_pred_marginal=log_pred_marginal,
        draws=draws,
    )


def run_combiner(
    method: str,
    obs: ObservationSeries,
    panel: PredictorPanel,
    horizon: int = 1,
    window: int | None = None,
    fallback_sigma: float = 0.1,
    n_pred_draws: int = 1000,
    seed: int = 0,
) -> CombinerResult:
    """Run one of the baselines: 'equal', 'bma' or 'bma_roll'."""
    T, K, L = obs.n_steps, panel.n_models, panel.n_vars
    if panel.n_steps < T:
        raise InputError("panel does not cover the observation range")
    if obs.n_vars != panel.n_vars:
        raise InputError("observation and panel variable counts differ")
    mu, sd = _gaussian_fit(panel, fallback_sigma)

    if method == "equal":
        weight_rows = np.full((T, K), 1.0 / K)

        def draws_fn(targets, w):
            # Pooled draws across models: the exact equal-weight mixture sample.
            block = panel.draws[targets - 1, :, :, horizon - 1, :]  # (S, K, L, D)
            return np.moveaxis(block, 3, 2).reshape(len(targets), K * panel.n_draws, L)

    elif method in ("bma", "bma_roll"):
        if method == "bma_roll" and window is None:
            raise InputError("bma_roll requires a window")
        joint_lp, _ = model_log_predictive_matrix(panel, obs, fallback_sigma)
        weight_rows = bma_weights(joint_lp, window=window if method == "bma_roll" else None)
        rng = substream(seed, "combine")

        def draws_fn(targets, w):
            out = np.empty((len(targets), n_pred_draws, L))
            for i, s in enumerate(targets):
                models = systematic_resample(w[i], rng, n=n_pred_draws)
                d = rng.integers(0, panel.n_draws, size=n_pred_draws)
                out[i] = panel.draws[s - 1, models, :, horizon - 1, d]
            return out

    else:
        raise InputError(f"unknown combiner {method!r}")

    forecasts = _combined_forecasts(panel, obs, weight_rows, horizon, mu, sd, draws_fn)
    weights = np.repeat(weight_rows[:, :, None], L, axis=2)
    return CombinerResult(
        method=method,
        times=np.arange(1, T + 1),
        weights=weights,
        forecasts=forecasts,
    )


def single_model_result(
    obs: ObservationSeries,
    panel: PredictorPanel,
    k: int,
    horizon: int = 1,
    fallback_sigma: float = 0.1,
) -> CombinerResult:
    """Expose panel model k (1-based) through the combiner interface."""
    if not 1 <= k <= panel.n_models:
        raise InputError(f"model index {k} outside 1..{panel.n_models}")
    T, K, L = obs.n_steps, panel.n_models, panel.n_vars
    mu, sd = _gaussian_fit(panel, fallback_sigma)
    weight_rows = np.zeros((T, K))
    weight_rows[:, k - 1] = 1.0

    def draws_fn(targets, w):
        block = panel.draws[targets - 1, k - 1, :, horizon - 1, :]  # (S, L, D)
        return np.moveaxis(block, 2, 1)

    forecasts = _combined_forecasts(panel, obs, weight_rows, horizon, mu, sd, draws_fn)
    weights = np.repeat(weight_rows[:, :, None], L, axis=2)
    return CombinerResult(
        method=panel.model_names[k - 1],
        times=np.arange(1, T + 1),
        weights=weights,
        forecasts=forecasts,
    )
