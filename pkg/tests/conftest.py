"""Shared fixtures: small simulated datasets and quickly trained models."""

import numpy as np
import pytest

from survgrad.data import train_test_split
from survgrad.models import (
    CoxWeibullOracle,
    TrainConfig,
    fit_coxtime,
    fit_deephit,
    fit_deepsurv,
)
from survgrad.simulation import design_preset, simulate


@pytest.fixture(scope="session")
def a1_small():
    """Small draw of the time-independent design, split for quick fits."""
    data = simulate(design_preset("time_independent", n=800, seed=0))
    train, test = train_test_split(data, 120, seed=0)
    return train, test


@pytest.fixture(scope="session")
def quick_cfg():
    return TrainConfig(
        hidden=(16, 16),
        batch_size=256,
        max_epochs=60,
        patience=8,
        seed=1,
        deephit_bins=12,
    )


@pytest.fixture(scope="session")
def deepsurv_small(a1_small, quick_cfg):
    return fit_deepsurv(a1_small[0], quick_cfg)


@pytest.fixture(scope="session")
def coxtime_small(a1_small, quick_cfg):
    return fit_coxtime(a1_small[0], quick_cfg)


@pytest.fixture(scope="session")
def deephit_small(a1_small, quick_cfg):
    return fit_deephit(a1_small[0], quick_cfg)


@pytest.fixture(scope="session")
def oracle_a1():
    return CoxWeibullOracle(0.1, 2.5, np.array([1.7, -2.4, 0.0]))


@pytest.fixture(scope="session")
def oracle_mild():
    """Moderate effect sizes: keeps path-integral and Shapley views close."""
    return CoxWeibullOracle(0.1, 2.5, np.array([0.6, -0.5, 0.25]))
