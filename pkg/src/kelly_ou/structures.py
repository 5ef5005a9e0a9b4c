"""Special volatility structures and their closed-form fraction results.

Two n x n structures are supported: a bidiagonal matrix (each asset
correlates only with its neighbor) and a lower-triangular matrix of ones
(global correlations), both scaled by a single volatility sigma. The
long-run expected total fraction of the bidiagonal market has the exact
value (n+1)/4 for odd n and n/4 for even n; the triangular market's
fractions reduce to second differences of the sigma^2-scaled excess
returns and their total telescopes to the first asset's scaled excess.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .kelly import FractionVector, kelly_fraction
from .market import MarketParams, drift_mu, stationary_mean_log
from .simulate import StrategySpec, simulate

__all__ = [
    "StructureKind",
    "build_sigma",
    "structured_params",
    "bidiagonal_limit_expected_total_fraction",
    "bidiagonal_limit_oracle",
    "bidiagonal_limit_mc",
    "triangular_fractions",
    "triangular_expected_total_fraction",
    "limit_expected_total_fraction",
]


@dataclass(frozen=True)
class StructureKind:
    """Named volatility structure: kind in {"bidiagonal", "triangular"}."""

    kind: str
    n: int
    sigma_scalar: float

    def __post_init__(self):
        if self.kind not in ("bidiagonal", "triangular"):
            raise ValueError(f"unknown structure kind {self.kind!r}")
        if self.n < 2:
            raise ValueError("structured markets need n >= 2")
        if self.sigma_scalar <= 0.0:
            raise ValueError("sigma_scalar must be positive")


def build_sigma(kind: StructureKind) -> np.ndarray:
    """Build the n x n volatility matrix for the named structure.

    Bidiagonal: sigma on the diagonal and superdiagonal. Triangular:
    sigma times the lower-triangular matrix of ones; its inverse is the
    bidiagonal (1, -1) matrix over sigma, which is verified on build.
    """
    n, s = kind.n, kind.sigma_scalar
    if kind.kind == "bidiagonal":
        return s * (np.eye(n) + np.eye(n, k=1))
    sigma = s * np.tri(n)
    inverse = (np.eye(n) - np.eye(n, k=-1)) / s
    gap = float(np.abs(sigma @ inverse - np.eye(n)).max())
    if gap > 1e-12:
        raise AssertionError(f"triangular inverse check failed: gap {gap:.3e}")
    return sigma


def structured_params(
    kind: StructureKind, a, b, r: float, s0
) -> MarketParams:
    """Market parameters with the named structure's volatility matrix."""
    return MarketParams(a=a, b=b, sigma=build_sigma(kind), r=r, s0=s0)


def bidiagonal_limit_expected_total_fraction(n: int) -> Fraction:
    """Long-run expected total fraction in the bidiagonal market (r = 0).

    Equals (n+1)/4 for odd n and n/4 for even n; for odd n the value is
    identical to the one for the next even number.
    """
    if n < 2:
        raise ValueError("bidiagonal structure needs n >= 2")
    return Fraction(n + 1, 4) if n % 2 else Fraction(n, 4)


def bidiagonal_limit_oracle(n: int, sigma_scalar: float, a=0.1, b=0.5) -> float:
    """Independent stationary-mean route to the long-run total fraction.

    At stationarity the mean log price is a_i / b_i, so with r = 0 the
    expected excess return collapses to 0.5 * ||sigma_i||^2 and the
    expected total fraction is 1' R^-1 E[c]. The result is independent of
    sigma_scalar and of the (a_i, b_i > 0) values.
    """
    kind = StructureKind("bidiagonal", n, sigma_scalar)
    params = structured_params(kind, a=a, b=b, r=0.0, s0=1.0)
    if np.any(params.b <= 0.0):
        raise ValueError("stationary oracle needs every b_i > 0")
    mean_state = params.state_at(0.0, stationary_mean_log(params))
    c_bar = drift_mu(params, mean_state) - params.r
    return float(np.linalg.solve(params.covariance, c_bar).sum())


def bidiagonal_limit_mc(
    n: int,
    sigma_scalar: float,
    a: float,
    b: float,
    t: float,
    n_steps: int,
    n_paths: int,
    seed: int,
    threads: int = 1,
):
    """Monte Carlo estimate (mean, se) of the expected total fraction at time t.

    Simulates the bidiagonal market started at its stationary mean log
    price and averages the total growth-optimal fraction over paths at the
    final time.
    """
    kind = StructureKind("bidiagonal", n, sigma_scalar)
    s0 = np.exp(a / b) * np.ones(n)
    params = structured_params(kind, a=a, b=b, r=0.0, s0=s0)
    ensemble = simulate(
        params, StrategySpec.kelly(), t, n_steps, n_paths, seed, threads=threads
    )
    totals = ensemble.fractions[:, -1, :].sum(axis=1)
    mean = float(totals.mean())
    se = float(totals.std(ddof=1) / np.sqrt(n_paths))
    return mean, se


def triangular_fractions(c_hat) -> FractionVector:
    """Optimal fractions of the triangular market from scaled excess returns.

    c_hat_i = (mu_i - r) / sigma^2. The fractions are second differences:
    f_1 = 2 c_1 - c_2, f_i = 2 c_i - c_{i-1} - c_{i+1}, f_n = c_n - c_{n-1},
    and the total telescopes to c_hat_1 exactly.
    """
    c_hat = np.asarray(c_hat, dtype=float)
    n = c_hat.size
    if n < 2:
        raise ValueError("triangular structure needs n >= 2")
    f = np.empty(n)
    f[0] = 2.0 * c_hat[0] - c_hat[1]
    if n > 2:
        f[1:-1] = 2.0 * c_hat[1:-1] - c_hat[:-2] - c_hat[2:]
    f[-1] = c_hat[-1] - c_hat[-2]
    return FractionVector(f)


def triangular_expected_total_fraction(
    a1: float, b1: float, sigma: float, r: float, s1_0: float, t: float
) -> float:
    """Expected total fraction of the triangular market at time t.

    Only the first asset matters: the value is
    ((a1 - b1 log s1_0) exp(-b1 t) + sigma^2 / 2 - r) / sigma^2.
    """
    if t < 0.0:
        raise ValueError("t must be nonnegative")
    transient = (a1 - b1 * np.log(s1_0)) * np.exp(-b1 * t)
    return float((transient + 0.5 * sigma**2 - r) / sigma**2)


def limit_expected_total_fraction(a1: float, b1: float, sigma: float, r: float) -> float:
    """Large-time limit of the triangular market's expected total fraction.

    (a1 + sigma^2/2 - r) / sigma^2 when b1 = 0, else (sigma^2/2 - r) / sigma^2;
    the limit is discontinuous in b1 at zero.
    """
    if b1 < 0.0:
        raise ValueError("b1 must be nonnegative")
    if b1 == 0.0:
        return float((a1 + 0.5 * sigma**2 - r) / sigma**2)
    return float((0.5 * sigma**2 - r) / sigma**2)
