import os

import numpy as np
import pytest

from sparse_lmpt.signal_model import NetworkModel, SignalModel

WORKERS = min(8, os.cpu_count() or 1)


@pytest.fixture
def unit_network():
    # single sensor, ||h||^2 = 1, sigma_w^2 = 1
    return NetworkModel(np.array([[1.0]]), 1.0)


@pytest.fixture
def fig2_signal_1d():
    return SignalModel(0.05, 8.0, 1)


@pytest.fixture(scope="session")
def net300():
    return NetworkModel.random(300, 1000, 1.0, seed=11)


@pytest.fixture(scope="session")
def sig_fig():
    return SignalModel(0.05, 8.0, 1000)
