"""Sequential Monte Carlo loop for the time-varying combination weights.

Each step propagates the particle cloud through the latent dynamics, updates
the importance weights with the one-step Gaussian combination likelihood,
records the prior-side (pre-update) predictive quantities, and resamples
systematically when the normalized effective sample size drops below the
threshold.  Forecasts emitted at step t target time t+h-1: they pair the
prior-side particle weights (information through t-1) with the panel's
horizon-h cell for that target, so every emitted forecast is out-of-sample.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DegeneracyError,
    ForecastSeries,
    InputError,
    NoiseConfig,
    ObservationSeries,
    PredictorPanel,
    default_sigma_obs,
)
from .diversity import diversity_vector
from .latent import LatentMode, ParticleCloud, cloud_weight_tensor, init_particles, propagate_cloud
from .rng import substream

BAND_LO = 0.025
BAND_HI = 0.975


def systematic_resample(weights: np.ndarray, rng: np.random.Generator, n: int | None = None) -> np.ndarray:
    """Systematic (single-offset stratified) resampling.

    Returns n index choices (default: len(weights)) with expected
    multiplicity n*w_i and total variance below one per index.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1:
        raise InputError("weights must be a vector")
    if np.any(w < -1e-12):
        raise InputError("weights must be non-negative")
    if abs(w.sum() - 1.0) > 1e-8:
        raise InputError(f"weights sum to {w.sum():.6g}, expected 1")
    n_out = len(w) if n is None else int(n)
    positions = (np.arange(n_out) + rng.uniform()) / n_out
    cum = np.cumsum(w)
    cum[-1] = 1.0  # guard accumulated rounding
    idx = np.searchsorted(cum, positions, side="right")
    return np.minimum(idx, len(w) - 1)


def effective_sample_size(omega: np.ndarray) -> float:
    """Normalized ESS, 1/(N * sum(omega^2)); 1 iff the weights are uniform."""
    omega = np.asarray(omega, dtype=float)
    return float(1.0 / (len(omega) * np.sum(omega**2)))


def _weighted_quantiles(values: np.ndarray, omega: np.ndarray, qs: tuple[float, ...]) -> list[np.ndarray]:
    """Weighted quantiles along axis 0 of a (N, M) array."""
    order = np.argsort(values, axis=0)
    sorted_vals = np.take_along_axis(values, order, axis=0)
    cum = np.cumsum(omega[order], axis=0)
    cum /= cum[-1:, :]
    out = []
    for q in qs:
        first = (cum >= q).argmax(axis=0)
        out.append(np.take_along_axis(sorted_vals, first[None, :], axis=0)[0])
    return out


def _band_stats(values: np.ndarray, omega: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Weighted mean and 95% band of per-particle statistics (N, M).

    Bands are widened to contain the mean in degenerate heavy-tail cases.
    """
    mean = omega @ values
    lo, hi = _weighted_quantiles(values, omega, (BAND_LO, BAND_HI))
    return mean, np.minimum(lo, mean), np.maximum(hi, mean)


def _logsumexp(logv: np.ndarray, axis: int = 0) -> np.ndarray:
    m = np.max(logv, axis=axis, keepdims=True)
    m = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        return np.squeeze(m, axis=axis) + np.log(np.sum(np.exp(logv - m), axis=axis))


def _combine_cloud(weights: np.ndarray, means: np.ndarray) -> np.ndarray:
    """Per-particle combined forecasts: (N, L, K) weights against a (K, L)
    mean matrix.  Summed model-by-model so a single-particle run reproduces a
    plain accumulation loop bit-for-bit."""
    return (weights * means.T[None, :, :]).sum(axis=2)


@dataclass
class FilterState:
    """Mutable filter position: the cloud, the time index of the last
    processed observation, the latest normalized ESS and the random stream."""

    cloud: ParticleCloud
    t: int
    ess: float
    rng: np.random.Generator


@dataclass
class FilterOutput:
    """Per-run summaries: posterior weight/coefficient trajectories with 95%
    bands, ESS path, one-step log predictives, and the out-of-sample
    forecast block at the run's horizon."""

    horizon: int
    n_particles: int
    times: np.ndarray
    weights_mean: np.ndarray
    weights_lo: np.ndarray
    weights_hi: np.ndarray
    prior_weights_mean: np.ndarray
    alpha_mean: np.ndarray
    alpha_lo: np.ndarray
    alpha_hi: np.ndarray
    ess: np.ndarray
    resampled: np.ndarray
    one_step_log_pred: np.ndarray
    one_step_log_pred_marginal: np.ndarray
    forecasts: ForecastSeries


class ParticleFilter:
    """Weight estimation and prediction loop for one combination method."""

    def __init__(
        self,
        panel: PredictorPanel,
        mode: LatentMode,
        cfg: NoiseConfig,
        horizon: int = 1,
        kappa: float = 0.5,
        n_pred_draws: int = 1000,
    ):
        if not 0 < kappa <= 1:
            raise InputError("ess threshold must lie in (0, 1]")
        if not 1 <= horizon <= panel.n_horizons:
            raise InputError(f"horizon {horizon} outside panel range 1..{panel.n_horizons}")
        if len(cfg.sigma_obs) != panel.n_vars:
            raise InputError(
                f"sigma_obs has {len(cfg.sigma_obs)} entries for {panel.n_vars} variables"
            )
        if n_pred_draws < 1:
            raise InputError("need at least one predictive draw")
        self.panel = panel
        self.mode = mode
        self.cfg = cfg
        self.horizon = horizon
        self.kappa = kappa
        self.n_pred_draws = n_pred_draws

    def init_state(
        self,
        n_particles: int,
        alpha0: np.ndarray,
        x0_spread: float,
        rng: np.random.Generator,
    ) -> FilterState:
        cloud = init_particles(
            n_particles, self.panel.n_models, self.panel.n_vars, alpha0, x0_spread, rng
        )
        return FilterState(cloud=cloud, t=0, ess=1.0, rng=rng)

    def step(self, state: FilterState, y_t: np.ndarray) -> tuple[FilterState, dict]:
        """Advance the filter by one observation; returns the new state and a
        record of everything emitted at this step."""
        panel, cfg = self.panel, self.cfg
        K, L = panel.n_models, panel.n_vars
        t = state.t + 1
        y_t = np.atleast_1d(np.asarray(y_t, dtype=float))
        if y_t.shape != (L,):
            raise InputError(f"observation at t={t} must have {L} entries")
        if not np.all(np.isfinite(y_t)):
            raise InputError(f"observation at t={t} is not finite")

        rng = state.rng
        if self.mode.uses_diversity:
            div = diversity_vector(panel, t, self.horizon)
        else:
            div = np.zeros(K * L)
        cloud = propagate_cloud(state.cloud, div, self.mode, cfg, rng)
        n = len(cloud)
        weights = cloud_weight_tensor(cloud.x, K, L)  # (N, L, K)
        omega_prior = cloud.omega / cloud.omega.sum()

        record: dict = {"t": t}
        record["prior_weights_mean"] = np.einsum("n,nlk->kl", omega_prior, weights)

        # Out-of-sample forecast for target s = t + h - 1, prior-side weights.
        target = t + self.horizon - 1
        if target <= panel.n_steps:
            pred_means = _combine_cloud(weights, panel.mean_matrix(target, self.horizon))
            record["target"] = target
            record["point"] = omega_prior @ pred_means
            record["pred_omega"] = omega_prior.copy()
            record["pred_means"] = pred_means
            record["draws"] = self._predictive_draws(weights, omega_prior, target, rng)

        # One-step likelihood update (log-space, max-shifted); overflow of
        # extreme residuals legitimately maps to -inf likelihoods.
        c1 = _combine_cloud(weights, panel.mean_matrix(t, 1))
        r = (y_t[None, :] - c1) / cfg.sigma_obs[None, :]
        with np.errstate(over="ignore"):
            loglik_marg = -0.5 * (np.log(2.0 * np.pi * cfg.sigma_obs**2)[None, :] + r**2)
        loglik = loglik_marg.sum(axis=1)
        with np.errstate(divide="ignore"):
            log_prior = np.where(omega_prior > 0, np.log(omega_prior), -np.inf)
        logw = log_prior + loglik
        shift = logw.max()
        if not np.isfinite(shift):
            raise DegeneracyError(
                f"all particle likelihoods vanished at t={t}; "
                "raise sigma_obs or the particle count"
            )
        w = np.exp(logw - shift)
        total = w.sum()
        if total <= 0 or not np.isfinite(total):
            raise DegeneracyError(
                f"importance weights degenerated at t={t}; "
                "raise sigma_obs or the particle count"
            )
        omega = w / total
        record["one_step_log_pred"] = float(shift + np.log(total))
        record["one_step_log_pred_marginal"] = _logsumexp(log_prior[:, None] + loglik_marg, axis=0)

        ess = effective_sample_size(omega)
        record["ess"] = ess
        resampled = ess < self.kappa
        record["resampled"] = resampled
        if resampled:
            idx = systematic_resample(omega, rng)
            cloud = ParticleCloud(cloud.x[idx], cloud.alpha[idx], np.full(n, 1.0 / n))
            weights = weights[idx]
            omega = cloud.omega
        else:
            cloud = ParticleCloud(cloud.x, cloud.alpha, omega)

        w_flat = weights.reshape(n, L * K)
        mean, lo, hi = _band_stats(w_flat, omega)
        record["weights_mean"] = mean.reshape(L, K).T
        record["weights_lo"] = lo.reshape(L, K).T
        record["weights_hi"] = hi.reshape(L, K).T
        a_mean, a_lo, a_hi = _band_stats(cloud.alpha, omega)
        record["alpha_mean"], record["alpha_lo"], record["alpha_hi"] = a_mean, a_lo, a_hi

        return FilterState(cloud=cloud, t=t, ess=ess, rng=rng), record

    def _predictive_draws(
        self,
        weights: np.ndarray,
        omega_prior: np.ndarray,
        target: int,
        rng: np.random.Generator,
    ) -> np.ndarray:
        """Sample the combined predictive mixture: pick particles by their
        prior weights, one panel draw per pick, plus observation noise."""
        J = self.n_pred_draws
        idx = systematic_resample(omega_prior, rng, n=J)
        block = self.panel.draw_block(target, self.horizon)  # (K, L, D)
        d = rng.integers(0, self.panel.n_draws, size=J)
        ysel = np.moveaxis(block[:, :, d], 2, 0)  # (J, K, L)
        comb = np.einsum("jlk,jkl->jl", weights[idx], ysel)
        noise = self.cfg.sigma_obs[None, :] * rng.standard_normal((J, self.panel.n_vars))
        return comb + noise

    def run(
        self,
        obs: ObservationSeries,
        n_particles: int,
        alpha0: np.ndarray,
        rng: np.random.Generator,
        x0_spread: float = 0.0,
    ) -> FilterOutput:
        panel = self.panel
        T, K, L = obs.n_steps, panel.n_models, panel.n_vars
        if obs.n_vars != L:
            raise InputError("observation and panel variable counts differ")
        if panel.n_steps < T:
            raise InputError("panel does not cover the observation range")

        state = self.init_state(n_particles, alpha0, x0_spread, rng)
        records = []
        for t in range(1, T + 1):
            state, record = self.step(state, obs.values[t - 1])
            records.append(record)

        def stack(key):
            return np.stack([r[key] for r in records])

        forecast_records = [r for r in records if "target" in r and r["target"] <= T]
        targets = np.array([r["target"] for r in forecast_records], dtype=int)
        point = np.stack([r["point"] for r in forecast_records]) if forecast_records else np.zeros((0, L))
        draws = (
            np.stack([r["draws"] for r in forecast_records])
            if forecast_records
            else np.zeros((0, self.n_pred_draws, L))
        )
        log_pred = np.empty(len(forecast_records))
        log_pred_marg = np.empty((len(forecast_records), L))
        for i, r in enumerate(forecast_records):
            if self.horizon == 1:
                log_pred[i] = r["one_step_log_pred"]
                log_pred_marg[i] = r["one_step_log_pred_marginal"]
            else:
                y_s = obs.values[r["target"] - 1]
                resid = (y_s[None, :] - r["pred_means"]) / self.cfg.sigma_obs[None, :]
                marg = -0.5 * (np.log(2.0 * np.pi * self.cfg.sigma_obs**2)[None, :] + resid**2)
                with np.errstate(divide="ignore"):
                    lo = np.where(r["pred_omega"] > 0, np.log(r["pred_omega"]), -np.inf)
                log_pred[i] = float(_logsumexp(lo + marg.sum(axis=1)))
                log_pred_marg[i] = _logsumexp(lo[:, None] + marg, axis=0)

        forecasts = ForecastSeries(
            horizon=self.horizon,
            targets=targets,
            point=point,
            log_pred=log_pred,
            log_pred_marginal=log_pred_marg,
            draws=draws,
        )
        return FilterOutput(
            horizon=self.horizon,
            n_particles=n_particles,
            times=np.arange(1, T + 1),
            weights_mean=stack("weights_mean"),
            weights_lo=stack("weights_lo"),
            weights_hi=stack("weights_hi"),
            prior_weights_mean=stack("prior_weights_mean"),
            alpha_mean=stack("alpha_mean"),
            alpha_lo=stack("alpha_lo"),
            alpha_hi=stack("alpha_hi"),
            ess=stack("ess"),
            resampled=stack("resampled"),
            one_step_log_pred=stack("one_step_log_pred"),
            one_step_log_pred_marginal=stack("one_step_log_pred_marginal"),
            forecasts=forecasts,
        )


def run_filter(
    obs: ObservationSeries,
    panel: PredictorPanel,
    mode: LatentMode,
    cfg: NoiseConfig | None = None,
    horizon: int = 1,
    n_particles: int = 1000,
    kappa: float = 0.5,
    seed: int = 0,
    alpha0: np.ndarray = (0.0, 0.0, 0.0),
    x0_spread: float = 0.0,
    n_pred_draws: int = 1000,
    sigma_x: float = 0.25,
    sigma_alpha: float = 0.05,
) -> FilterOutput:
    """Configure and run the filter; sigma_obs defaults to the calibrated
    equal-weight residual scale when no NoiseConfig is given."""
    if cfg is None:
        cfg = NoiseConfig(default_sigma_obs(obs, panel), sigma_x=sigma_x, sigma_alpha=sigma_alpha)
    pf = ParticleFilter(panel, mode, cfg, horizon=horizon, kappa=kappa, n_pred_draws=n_pred_draws)
    rng = substream(seed, "filter")
    return pf.run(obs, n_particles, np.asarray(alpha0, dtype=float), rng, x0_spread=x0_spread)
