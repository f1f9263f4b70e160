import numpy as np
import pytest

from divcast.core import ObservationSeries, PredictorPanel


@pytest.fixture
def tiny_panel():
    """K=2 models, L=1 variable, H=1, D=1, T=3 with fixed values."""
    draws = np.zeros((3, 2, 1, 1, 1))
    draws[:, 0, 0, 0, 0] = [1.0, 2.0, 3.0]
    draws[:, 1, 0, 0, 0] = [3.0, 4.0, 5.0]
    return PredictorPanel(draws, ("A", "B"), ("y",))


@pytest.fixture
def tiny_obs():
    return ObservationSeries(np.array([[2.0], [3.0], [4.0]]), ("y",))
