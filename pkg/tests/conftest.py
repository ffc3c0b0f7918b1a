import numpy as np
import pytest

from sparsevar.panel import TimePanel
from datetime import date, timedelta


def daily_panel(values, names=None, start=date(2020, 1, 1)):
    """TimePanel over consecutive days starting at `start`."""
    values = np.atleast_2d(np.asarray(values, dtype=float))
    if values.shape[0] == 1 and values.shape[1] > 1 and names is None:
        values = values.T
    T, K = values.shape
    names = names or tuple(f"s{k}" for k in range(K))
    dates = tuple(start + timedelta(days=i) for i in range(T))
    return TimePanel(dates, names, values)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
