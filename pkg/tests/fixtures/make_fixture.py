"""Regenerate the bundled pseudo-empirical fixture.

A bivariate (inflation-like, growth-like) monthly-style series of length 120
with three candidate forecasters of differing quality per variable, horizons
1..3 and 5 predictive draws per cell.  Run from the repository root:

    python3 tests/fixtures/make_fixture.py
"""

import os

import numpy as np

from divcast.core import ObservationSeries, PredictorPanel
from divcast.dataio import save_observations, save_panel

T, H, D = 120, 3, 5
SIGMA = np.array([0.30, 0.45])
VARIABLES = ("infl", "growth")
MODELS = ("mdl_a", "mdl_b", "mdl_c")

# Truth: VAR(1)-style pair with mild cross-feedback.
def truth_step(prev, rng):
    infl = 0.20 + 0.70 * prev[0] + 0.10 * prev[1] + SIGMA[0] * rng.standard_normal()
    growth = 0.50 + 0.55 * prev[1] - 0.15 * prev[0] + SIGMA[1] * rng.standard_normal()
    return np.array([infl, growth])

# Candidate conditional means given the truth's previous pair; each model is
# good on one variable and biased elsewhere so the combiners have signal.
def model_mean(k, prev):
    infl, growth = prev
    if k == 0:
        return np.array([0.20 + 0.70 * infl + 0.10 * growth, 0.90 + 0.40 * growth])
    if k == 1:
        return np.array([0.55 + 0.45 * infl, 0.50 + 0.55 * growth - 0.15 * infl])
    return np.array([0.35 + 0.55 * infl, 0.70 + 0.45 * growth])


def main():
    rng = np.random.default_rng(20240817)
    y = np.empty((T + 1, 2))
    y[0] = [0.8, 1.0]
    for t in range(1, T + 1):
        y[t] = truth_step(y[t - 1], rng)
    truth = y[1:]

    def prev_pair(i):  # truth pair before 1-based time i
        return y[i - 1] if i >= 1 else y[0]

    draws = np.empty((T, len(MODELS), 2, H, D))
    for t in range(1, T + 1):
        for h in range(1, H + 1):
            start = prev_pair(t - h + 1)
            for k in range(len(MODELS)):
                paths = np.tile(start, (D, 1))
                for s in range(h):
                    means = np.stack([model_mean(k, p) for p in paths])
                    paths = means + SIGMA * rng.standard_normal((D, 2))
                draws[t - 1, k, :, h - 1, :] = paths.T

    obs = ObservationSeries(truth, VARIABLES)
    panel = PredictorPanel(draws, MODELS, VARIABLES)
    here = os.path.dirname(__file__)
    out = os.path.join(here, "pseudo_empirical")
    os.makedirs(out, exist_ok=True)
    save_observations(obs, os.path.join(out, "observations.csv"))
    save_panel(panel, os.path.join(out, "panel.csv"))
    print(f"wrote fixture to {out} (T={T}, K={len(MODELS)}, L=2, H={H}, D={D})")


if __name__ == "__main__":
    main()
