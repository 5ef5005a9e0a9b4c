"""Growth-optimal (log-utility) fractions and their supporting quantities.

The optimal fraction vector solves R f = c with R = sigma @ sigma.T and
c the vector of excess returns; the market price of risk solves
sigma theta = c. When sigma is rank deficient the fraction solver falls
back to the minimum-norm pseudoinverse solution and flags the result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .market import RANK_RTOL, MarketParams, MarketState, excess_return, _freeze

__all__ = [
    "FractionVector",
    "Holdings",
    "RiskPremium",
    "SingularVolatilityError",
    "market_price_of_risk",
    "kelly_fraction",
    "replicating_holdings",
    "mean_variance_objective",
    "growth_rate",
]


class SingularVolatilityError(ValueError):
    """Raised when an operation needs an invertible volatility matrix."""

    def __init__(self, rank: int, n: int):
        self.rank = rank
        self.n = n
        super().__init__(f"singular volatility matrix: rank {rank} < {n}")


@dataclass(frozen=True, eq=False)
class FractionVector:
    """Portfolio weights per risky asset; cash weight is 1 - sum(f).

    Entries are unconstrained (leverage and shorting allowed). `pseudo`
    marks a minimum-norm solution obtained through the pseudoinverse of a
    singular covariance, so downstream consumers can warn that the market
    is incomplete.
    """

    f: np.ndarray
    pseudo: bool = False

    def __post_init__(self):
        f = np.asarray(self.f, dtype=float)
        if f.ndim != 1:
            raise ValueError(f"f must be a vector, got shape {f.shape}")
        if not np.all(np.isfinite(f)):
            raise ValueError("fractions must be finite")
        object.__setattr__(self, "f", _freeze(f))


@dataclass(frozen=True, eq=False)
class Holdings:
    """Units of the savings account (phi0) and of each asset (phi)."""

    phi0: float
    phi: np.ndarray

    def value(self, bank: float, prices: np.ndarray) -> float:
        return float(self.phi0 * bank + self.phi @ prices)


@dataclass(frozen=True, eq=False)
class RiskPremium:
    """Market price of risk theta, the solution of sigma @ theta = c."""

    theta: np.ndarray


def market_price_of_risk(params: MarketParams, state: MarketState) -> RiskPremium:
    """Solve sigma @ theta = c; errors out on a rank-deficient sigma."""
    if params.is_degenerate:
        raise SingularVolatilityError(params.sigma_rank, params.n)
    c = excess_return(params, state)
    return RiskPremium(theta=np.linalg.solve(params.sigma, c))


def kelly_fraction(params: MarketParams, state: MarketState) -> FractionVector:
    """Growth-optimal fractions f solving R f = c, R = sigma @ sigma.T.

    A singular R is handled by the Moore-Penrose pseudoinverse, returning
    the minimum-norm solution flagged as pseudo.
    """
    c = excess_return(params, state)
    if not params.is_degenerate:
        return FractionVector(np.linalg.solve(params.covariance, c))
    f = np.linalg.pinv(params.covariance, rcond=RANK_RTOL) @ c
    return FractionVector(f, pseudo=True)


def replicating_holdings(
    params: MarketParams, state: MarketState, wealth: float
) -> Holdings:
    """Holdings realizing the optimal fractions at the given wealth.

    phi_i = f_i * V / S_i and phi0 = (1 - sum f) * V / B, so the holdings
    reproduce the wealth exactly: phi0 * B + phi . S = V.
    """
    if wealth <= 0.0:
        raise ValueError("wealth must be positive")
    fractions = kelly_fraction(params, state)
    prices = state.prices
    phi = fractions.f * wealth / prices
    phi0 = (1.0 - float(fractions.f.sum())) * wealth / state.bank
    return Holdings(phi0=float(phi0), phi=phi)


def mean_variance_objective(c: np.ndarray, R: np.ndarray, x: np.ndarray) -> float:
    """Quadratic objective c.x - 0.5 x.R.x maximized by the optimal fractions."""
    c = np.asarray(c, dtype=float)
    R = np.asarray(R, dtype=float)
    x = np.asarray(x, dtype=float)
    asym = float(np.abs(R - R.T).max(initial=0.0))
    if asym > 1e-10:
        raise ValueError(f"R must be symmetric; asymmetry {asym:.3e}")
    return float(c @ x - 0.5 * x @ R @ x)


def growth_rate(params: MarketParams, state: MarketState, f) -> float:
    """Instantaneous expected log-wealth growth r + f.c - 0.5 f.R.f."""
    weights = f.f if isinstance(f, FractionVector) else np.asarray(f, dtype=float)
    c = excess_return(params, state)
    return float(
        params.r + weights @ c - 0.5 * weights @ params.covariance @ weights
    )
