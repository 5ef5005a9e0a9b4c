"""Mean-reverting market model: parameters, state, and exact Gaussian transitions.

Log prices follow the linear SDE dx_i = (a_i - b_i x_i) dt + sigma_i . dW
with a constant short rate r. The one-step law of x over any horizon is
Gaussian and available in closed form, so simulated asset paths carry no
time-discretization bias. All types are immutable after construction and
every operation is a pure function; randomness enters only through noise
vectors passed in explicitly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "MarketParams",
    "MarketState",
    "GaussianStep",
    "drift_mu",
    "excess_return",
    "transition_law",
    "transition_coefficients",
    "sample_step",
    "stationary_mean_log",
    "psd_factor",
]

# Relative singular-value cutoff for deciding the rank of the volatility
# matrix (dense direct solves; robustness over speed at desk scale).
RANK_RTOL = 1e-10

# Eigenvalues of a covariance in (-PSD_CLIP_TOL, 0) are round-off and get
# clipped to zero; anything below -PSD_CLIP_TOL is a genuine PSD violation.
PSD_CLIP_TOL = 1e-12


def _as_vector(value, n: int, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        arr = np.full(n, float(arr))
    if arr.shape != (n,):
        raise ValueError(f"{name} must be a length-{n} vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    return arr


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr, dtype=float)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class MarketParams:
    """Market definition: n risky assets plus a savings account.

    a, b are the level and mean-reversion rates of the log-price dynamics
    (b acts as a diagonal matrix), sigma is the n x n volatility matrix,
    r the constant short rate, and s0 the initial prices. b_i = 0 is
    allowed; every b-dependent expression uses its analytic zero limit.
    """

    a: np.ndarray
    b: np.ndarray
    sigma: np.ndarray
    r: float
    s0: np.ndarray
    covariance: np.ndarray = field(init=False, repr=False)
    row_norms_sq: np.ndarray = field(init=False, repr=False)
    sigma_rank: int = field(init=False)

    def __post_init__(self):
        sigma = np.asarray(self.sigma, dtype=float)
        if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1]:
            raise ValueError(f"sigma must be square, got shape {sigma.shape}")
        n = sigma.shape[0]
        a = _as_vector(self.a, n, "a")
        b = _as_vector(self.b, n, "b")
        s0 = _as_vector(self.s0, n, "s0")
        if np.any(b < 0.0):
            raise ValueError("mean-reversion rates b must be nonnegative")
        if np.any(s0 <= 0.0):
            raise ValueError("initial prices s0 must be positive")
        if not np.all(np.isfinite(sigma)):
            raise ValueError("sigma must be finite")

        cov = sigma @ sigma.T
        asym = float(np.abs(cov - cov.T).max(initial=0.0))
        if asym > 1e-12:
            raise ValueError(f"sigma @ sigma.T asymmetric by {asym:.3e}")
        cov = 0.5 * (cov + cov.T)

        svals = np.linalg.svd(sigma, compute_uv=False)
        rank = int(np.sum(svals > RANK_RTOL * (svals[0] if svals.size else 0.0)))

        object.__setattr__(self, "a", _freeze(a))
        object.__setattr__(self, "b", _freeze(b))
        object.__setattr__(self, "sigma", _freeze(sigma))
        object.__setattr__(self, "r", float(self.r))
        object.__setattr__(self, "s0", _freeze(s0))
        object.__setattr__(self, "covariance", _freeze(cov))
        object.__setattr__(self, "row_norms_sq", _freeze(np.sum(sigma**2, axis=1)))
        object.__setattr__(self, "sigma_rank", rank)

    @property
    def n(self) -> int:
        return self.sigma.shape[0]

    @property
    def is_degenerate(self) -> bool:
        """True when sigma is rank deficient (accepted, but flagged)."""
        return self.sigma_rank < self.n

    def initial_state(self) -> "MarketState":
        return MarketState(t=0.0, x=np.log(self.s0), bank=1.0)

    def state_at(self, t: float, x) -> "MarketState":
        """Build a state at time t with the bank account at its derived value."""
        x = _as_vector(x, self.n, "x")
        return MarketState(t=float(t), x=x, bank=float(np.exp(self.r * t)))


@dataclass(frozen=True, eq=False)
class MarketState:
    """Time t, log-price vector x, and the savings-account value exp(r*t).

    The bank value is derived, never free; build states through
    MarketParams.state_at / initial_state so the relation holds.
    """

    t: float
    x: np.ndarray
    bank: float

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        if x.ndim != 1:
            raise ValueError(f"x must be a vector, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValueError("x must be finite")
        if self.t < 0.0:
            raise ValueError("t must be nonnegative")
        if self.bank <= 0.0:
            raise ValueError("bank must be positive")
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "x", _freeze(x))
        object.__setattr__(self, "bank", float(self.bank))

    @property
    def prices(self) -> np.ndarray:
        """Asset prices exp(x); positive by construction."""
        return np.exp(self.x)


@dataclass(frozen=True, eq=False)
class GaussianStep:
    """One-step Gaussian transition law of the log-price vector."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=float)
        cov = np.asarray(self.cov, dtype=float)
        if cov.shape != (mean.size, mean.size):
            raise ValueError("cov shape does not match mean")
        asym = float(np.abs(cov - cov.T).max(initial=0.0))
        if asym > 1e-12:
            raise ValueError(f"cov asymmetric by {asym:.3e}")
        object.__setattr__(self, "mean", _freeze(mean))
        object.__setattr__(self, "cov", _freeze(0.5 * (cov + cov.T)))


def drift_mu(params: MarketParams, state: MarketState) -> np.ndarray:
    """Instantaneous price drift mu_i = a_i - b_i x_i + 0.5 * ||sigma_i||^2."""
    return params.a - params.b * state.x + 0.5 * params.row_norms_sq


def excess_return(params: MarketParams, state: MarketState) -> np.ndarray:
    """Excess return over the short rate, c = mu - r."""
    return drift_mu(params, state) - params.r


def _expm1_ratio(rates: np.ndarray, dt: float) -> np.ndarray:
    """(1 - exp(-rate*dt)) / rate with the analytic limit dt at rate = 0."""
    out = np.full(rates.shape, dt, dtype=float)
    nz = rates > 0.0
    out[nz] = -np.expm1(-rates[nz] * dt) / rates[nz]
    return out


def transition_coefficients(params: MarketParams, dt: float):
    """Exact one-step coefficients (decay, shift, cov) with x' = decay*x + shift + noise.

    decay_i = exp(-b_i dt); shift_i = a_i * (1 - exp(-b_i dt)) / b_i; and
    cov_ij = R_ij * (1 - exp(-(b_i+b_j) dt)) / (b_i + b_j), each with its
    b -> 0 limit taken analytically rather than by division.
    """
    if dt <= 0.0:
        raise ValueError("dt must be positive")
    decay = np.exp(-params.b * dt)
    shift = params.a * _expm1_ratio(params.b, dt)
    rate_sum = params.b[:, None] + params.b[None, :]
    cov = params.covariance * _expm1_ratio(rate_sum, dt)
    return decay, shift, cov


def transition_law(params: MarketParams, state: MarketState, dt: float) -> GaussianStep:
    """Exact Gaussian law of x(t+dt) given x(t)."""
    decay, shift, cov = transition_coefficients(params, dt)
    return GaussianStep(mean=decay * state.x + shift, cov=cov)


def psd_factor(cov: np.ndarray, tol: float = PSD_CLIP_TOL) -> np.ndarray:
    """Factor L with L @ L.T = cov for a (numerically) PSD covariance.

    Eigenvalues in (-tol, 0) are treated as round-off and clipped to zero;
    an eigenvalue below -tol signals a symmetry/PSD bug upstream.
    """
    cov = np.asarray(cov, dtype=float)
    w, v = np.linalg.eigh(0.5 * (cov + cov.T))
    if w.size and w[0] < -tol:
        raise np.linalg.LinAlgError(
            f"covariance not positive semidefinite: min eigenvalue {w[0]:.3e}"
        )
    w = np.clip(w, 0.0, None)
    return v * np.sqrt(w)


def sample_step(law: GaussianStep, noise: np.ndarray) -> np.ndarray:
    """Map standard-normal noise through the transition law: mean + L @ noise."""
    noise = np.asarray(noise, dtype=float)
    return law.mean + psd_factor(law.cov) @ noise


def stationary_mean_log(params: MarketParams) -> np.ndarray:
    """Long-run mean a_i / b_i of the log prices; requires every b_i > 0."""
    if np.any(params.b == 0.0):
        idx = int(np.argmin(params.b))
        raise ValueError(f"no stationary distribution: b[{idx}] = 0")
    return params.a / params.b
