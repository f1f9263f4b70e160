"""Domain types shared across the package, plus the softmax link and the
Gaussian combination likelihood.

Conventions used throughout:

* Observations are a (T, L) array: T time steps, L target variables.
* A predictor panel is a dense (T, K, L, H, D) array of predictive draws:
  K candidate models, H forecast horizons, D draws per cell.  Cell
  ``(t, k, l, h)`` holds model k's draws for variable l *at target time t*,
  issued at time t-h (so the horizon-1 cell for time t is the one-step-ahead
  forecast made at t-1).
* A weight matrix is a (K, L) array whose columns live on the K-simplex.
* Latent weight vectors are vectorized column-major (variable-major):
  entry ``l*K + k`` of x corresponds to matrix entry (k, l).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class InputError(ValueError):
    """Invalid data passed to an operation (exit code 2 at the CLI)."""


class ConfigError(InputError):
    """Invalid configuration value (exit code 2 at the CLI)."""


class DataFormatError(InputError):
    """Malformed input file contents (exit code 2 at the CLI)."""


class DegeneracyError(RuntimeError):
    """Numerical failure of the filter (exit code 3 at the CLI)."""


SIMPLEX_TOL = 1e-10


@dataclass(frozen=True)
class ObservationSeries:
    """Observed target path: values has shape (T, L)."""

    values: np.ndarray
    variable_names: tuple[str, ...]

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim == 1:
            values = values[:, None]
        if values.ndim != 2 or values.shape[0] < 1:
            raise InputError("observations must be a (T, L) array with T >= 1")
        if len(self.variable_names) != values.shape[1]:
            raise InputError(
                f"{len(self.variable_names)} variable names for "
                f"{values.shape[1]} columns"
            )
        if not np.all(np.isfinite(values)):
            raise InputError("observations contain non-finite values")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "variable_names", tuple(self.variable_names))

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class PredictorPanel:
    """Dense panel of predictive draws, shape (T, K, L, H, D)."""

    draws: np.ndarray
    model_names: tuple[str, ...]
    variable_names: tuple[str, ...] | None = None
    _means: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        draws = np.asarray(self.draws, dtype=float)
        if draws.ndim != 5:
            raise InputError("panel draws must be a (T, K, L, H, D) array")
        T, K, L, H, D = draws.shape
        if min(T, K, L, H, D) < 1:
            raise InputError("panel dimensions must all be >= 1")
        if len(self.model_names) != K:
            raise InputError(f"{len(self.model_names)} model names for {K} models")
        if self.variable_names is not None and len(self.variable_names) != L:
            raise InputError(f"{len(self.variable_names)} variable names for {L} variables")
        if not np.all(np.isfinite(draws)):
            raise InputError("panel draws contain non-finite values")
        object.__setattr__(self, "draws", draws)
        object.__setattr__(self, "model_names", tuple(self.model_names))
        if self.variable_names is not None:
            object.__setattr__(self, "variable_names", tuple(self.variable_names))
        object.__setattr__(self, "_means", draws.mean(axis=4))

    @property
    def n_steps(self) -> int:
        return self.draws.shape[0]

    @property
    def n_models(self) -> int:
        return self.draws.shape[1]

    @property
    def n_vars(self) -> int:
        return self.draws.shape[2]

    @property
    def n_horizons(self) -> int:
        return self.draws.shape[3]

    @property
    def n_draws(self) -> int:
        return self.draws.shape[4]

    def mean_matrix(self, t: int, h: int = 1) -> np.ndarray:
        """Per-cell draw means at target time t (1-based), shape (K, L)."""
        self._check_index(t, h)
        return self._means[t - 1, :, :, h - 1]

    def draw_block(self, t: int, h: int = 1) -> np.ndarray:
        """All draws at target time t (1-based), shape (K, L, D)."""
        self._check_index(t, h)
        return self.draws[t - 1, :, :, h - 1, :]

    def _check_index(self, t: int, h: int) -> None:
        if not 1 <= t <= self.n_steps:
            raise InputError(f"time index {t} outside 1..{self.n_steps}")
        if not 1 <= h <= self.n_horizons:
            raise InputError(f"horizon {h} outside 1..{self.n_horizons}")


@dataclass(frozen=True)
class NoiseConfig:
    """Noise scales: sigma_obs is the (L,) diagonal of the observation
    covariance; sigma_x and sigma_alpha drive the latent random walks.

    Zero sigma_x / sigma_alpha are permitted (deterministic-limit mode);
    sigma_obs must be strictly positive wherever a likelihood is evaluated.
    """

    sigma_obs: np.ndarray
    sigma_x: float = 0.25
    sigma_alpha: float = 0.05

    def __post_init__(self):
        sigma_obs = np.atleast_1d(np.asarray(self.sigma_obs, dtype=float))
        if sigma_obs.ndim != 1:
            raise ConfigError("sigma_obs must be a vector")
        if not np.all(np.isfinite(sigma_obs)):
            raise ConfigError("sigma_obs must be finite")
        if self.sigma_x < 0 or self.sigma_alpha < 0:
            raise ConfigError("sigma_x and sigma_alpha must be >= 0")
        object.__setattr__(self, "sigma_obs", sigma_obs)
        object.__setattr__(self, "sigma_x", float(self.sigma_x))
        object.__setattr__(self, "sigma_alpha", float(self.sigma_alpha))


@dataclass(frozen=True)
class ForecastSeries:
    """Out-of-sample forecasts of one method at one horizon.

    targets are 1-based target-time indices; point is (S, L); draws is
    (S, J, L) equally weighted predictive samples; log_pred is the joint
    log predictive density at the realized outcome, log_pred_marginal the
    per-variable marginals.
    """

    horizon: int
    targets: np.ndarray
    point: np.ndarray
    log_pred: np.ndarray
    log_pred_marginal: np.ndarray
    draws: np.ndarray


def validate_weight_matrix(w: np.ndarray, tol: float = SIMPLEX_TOL) -> np.ndarray:
    """Check the (K, L) weight-matrix invariants and return w as float array."""
    w = np.asarray(w, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    if np.any(w < -tol) or np.any(w > 1 + tol):
        raise InputError("weight entries must lie in [0, 1]")
    if np.any(np.abs(w.sum(axis=0) - 1.0) > tol):
        raise InputError("weight columns must sum to 1")
    return w


def softmax_link(x_col: np.ndarray) -> np.ndarray:
    """Map a latent K-vector to simplex weights, exp(x_k)/sum(exp(x)).

    Computed with max-subtraction so arbitrarily large inputs cannot
    overflow.
    """
    x_col = np.asarray(x_col, dtype=float)
    if not np.all(np.isfinite(x_col)):
        raise InputError("softmax input must be finite")
    z = np.exp(x_col - x_col.max())
    return z / z.sum()


def latent_to_matrix(x: np.ndarray, n_models: int, n_vars: int) -> np.ndarray:
    """Un-vectorize a latent K*L vector into its (K, L) matrix."""
    x = np.asarray(x, dtype=float)
    if x.shape != (n_models * n_vars,):
        raise InputError(f"latent vector must have length {n_models * n_vars}")
    return x.reshape(n_vars, n_models).T


def matrix_to_latent(m: np.ndarray) -> np.ndarray:
    """Vectorize a (K, L) matrix column by column (variable-major)."""
    return np.asarray(m, dtype=float).T.ravel()


def weights_from_latent(x: np.ndarray, n_models: int, n_vars: int) -> np.ndarray:
    """Apply the softmax link per variable: column l of the result is the
    softmax of the latent entries for variable l."""
    xm = latent_to_matrix(x, n_models, n_vars)
    if not np.all(np.isfinite(xm)):
        raise InputError("latent vector must be finite")
    z = np.exp(xm - xm.max(axis=0, keepdims=True))
    return z / z.sum(axis=0, keepdims=True)


def combined_point(w: np.ndarray, ytilde: np.ndarray) -> np.ndarray:
    """Weight-combined point forecast: component l is sum_k w[k,l]*ytilde[k,l]."""
    w = np.asarray(w, dtype=float)
    ytilde = np.asarray(ytilde, dtype=float)
    if w.ndim == 1:
        w = w[:, None]
    if ytilde.ndim == 1:
        ytilde = ytilde[:, None]
    if w.shape != ytilde.shape:
        raise InputError(f"shape mismatch: weights {w.shape} vs forecasts {ytilde.shape}")
    return (w * ytilde).sum(axis=0)


def gaussian_logpdf_diag(y: np.ndarray, mean: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Sum over the last axis of independent Gaussian log densities."""
    r = (np.asarray(y, dtype=float) - mean) / sigma
    return -0.5 * (np.log(2.0 * np.pi * sigma**2) + r**2).sum(axis=-1)


def log_likelihood(y: np.ndarray, w: np.ndarray, ytilde: np.ndarray, cfg: NoiseConfig) -> float:
    """Log of the Gaussian combination density of y given weights and
    predictor values, with diagonal observation covariance.

    Includes the -0.5*sum(log(2 pi sigma_l^2)) normalizer, so exp of the
    result integrates to one over y.
    """
    if np.any(cfg.sigma_obs <= 0):
        raise ConfigError("sigma_obs must be strictly positive for likelihoods")
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if not np.all(np.isfinite(y)):
        raise InputError("observation must be finite")
    c = combined_point(w, ytilde)
    if y.shape != c.shape:
        raise InputError(f"observation has {y.shape[0]} entries, expected {c.shape[0]}")
    return float(gaussian_logpdf_diag(y, c, cfg.sigma_obs))


def default_sigma_obs(obs: ObservationSeries, panel: PredictorPanel) -> np.ndarray:
    """Scale-adaptive default for the observation noise: the per-variable
    sample standard deviation of equal-weight combination residuals over the
    first max(10, T/10) steps, floored away from zero.
    """
    T = obs.n_steps
    n_cal = min(T, max(10, T // 10))
    means = panel._means[:n_cal, :, :, 0]  # (n_cal, K, L)
    resid = obs.values[:n_cal] - means.mean(axis=1)
    ddof = 1 if n_cal > 1 else 0
    sd = resid.std(axis=0, ddof=ddof)
    scale = np.abs(obs.values[:n_cal]).mean(axis=0)
    floor = np.maximum(1e-6, 1e-3 * np.maximum(scale, 1e-6))
    return np.maximum(sd, floor)
