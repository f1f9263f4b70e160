"""Scaled model diversity: the forward-looking signal injected into the
latent weight process.

For one variable, entry k is the sum of squared distances of model k's
forecast to every other model's forecast, normalized by the total over all
ordered pairs.  Columns therefore sum to one, and entries are invariant to
shifting or rescaling all forecasts of a variable together.
"""

from __future__ import annotations

import numpy as np

from .core import InputError, PredictorPanel, matrix_to_latent


def scaled_diversity(preds: np.ndarray) -> np.ndarray:
    """Diversity matrix of a (K, L) block of point forecasts.

    Entry (k, l) is sum_i (p[k,l]-p[i,l])^2 / sum_{i,j} (p[i,l]-p[j,l])^2.
    A column whose forecasts are all identical carries no diversity
    information and falls back to the uniform 1/K column.
    """
    preds = np.asarray(preds, dtype=float)
    if preds.ndim == 1:
        preds = preds[:, None]
    if preds.ndim != 2:
        raise InputError("predictions must be a (K, L) matrix")
    K = preds.shape[0]
    if K < 2:
        raise InputError("diversity needs at least two models")
    if not np.all(np.isfinite(preds)):
        raise InputError("predictions must be finite")

    # Pairwise squared differences, computed from actual differences so the
    # location invariance holds to round-off.
    diff = preds[:, None, :] - preds[None, :, :]  # (K, K, L)
    sq = diff**2
    num = sq.sum(axis=1)  # (K, L)
    den = num.sum(axis=0)  # (L,)

    out = np.empty_like(num)
    degenerate = den == 0.0
    safe = np.where(degenerate, 1.0, den)
    out[:] = num / safe
    out[:, degenerate] = 1.0 / K
    return out


def diversity_vector(panel: PredictorPanel, t: int, h: int) -> np.ndarray:
    """Vectorized diversity of the panel's horizon-h draw means at target
    time t, laid out entrywise with the latent weight vector (the (k, l)
    diversity entry multiplies the (k, l) latent coordinate).
    """
    means = panel.mean_matrix(t, h)
    return matrix_to_latent(scaled_diversity(means))
