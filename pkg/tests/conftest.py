import numpy as np
import pandas as pd
import pytest

from shapcouncil.backtest import run
from shapcouncil.config import RunConfig
from shapcouncil.io import FeatureTable, PriceTable
from shapcouncil.synthetic import synthetic_market


@pytest.fixture
def conf():
    return RunConfig.from_layers()


@pytest.fixture(scope="session")
def synthetic():
    """Bundled 13-asset, 540-day bull/volatile/bear market"""
    return synthetic_market(periods=540, seed=7)


@pytest.fixture(scope="session")
def synthetic_tables(synthetic):
    prices, features = synthetic
    return PriceTable(prices), FeatureTable(features)


@pytest.fixture(scope="session")
def golden_run(synthetic_tables):
    prices, features = synthetic_tables
    return run(prices, features, RunConfig.from_layers())


@pytest.fixture
def toy_prices():
    """Three assets over 90 days, two trending up and one down"""
    dates = pd.date_range("2024-01-01", periods=90, freq="D", name="date")
    t = np.arange(90)[:, None]
    rng = np.random.default_rng(11)
    logp = np.log([100.0, 20.0, 5.0]) + t * [0.004, 0.002, -0.003]
    logp = logp + rng.normal(0, 0.01, logp.shape)
    frame = pd.DataFrame(np.exp(logp), index=dates, columns=["BTC", "ETH", "ADA"])
    return PriceTable(frame)


@pytest.fixture
def toy_run(toy_prices, conf):
    return run(toy_prices, conf=conf)
