import numpy as np
import pytest

from kelly_ou import MarketParams


@pytest.fixture
def showcase_params():
    """Single-asset showcase market: a=0.5, b=0.2, sigma=0.1, r=0.03, S0=10."""
    return MarketParams(a=0.5, b=0.2, sigma=[[0.1]], r=0.03, s0=10.0)


@pytest.fixture
def gbm_params():
    """Zero-mean-reversion (geometric Brownian motion) market."""
    return MarketParams(a=0.05, b=0.0, sigma=[[0.2]], r=0.01, s0=1.0)


@pytest.fixture
def two_asset_params():
    return MarketParams(
        a=[0.5, 0.1],
        b=[0.2, 0.5],
        sigma=[[0.1, 0.0], [0.1, 0.1]],
        r=0.03,
        s0=[10.0, 1.0],
    )


def random_params(rng, n, b_low=0.0, b_high=2.0, r=None):
    sigma = 0.3 * rng.standard_normal((n, n)) / np.sqrt(n)
    return MarketParams(
        a=rng.normal(scale=0.3, size=n),
        b=rng.uniform(b_low, b_high, size=n),
        sigma=sigma,
        r=rng.normal(scale=0.02) if r is None else r,
        s0=rng.uniform(0.5, 20.0, size=n),
    )
