"""Monte Carlo simulation of asset paths and self-financing wealth.

Two wealth schemes are provided on purpose. The budget-identity scheme
freezes holdings over each step and rolls wealth forward through
dV = phi0 dB + phi . dS, so it is exactly self-financing but can go
bankrupt at coarse step sizes (bankrupt paths are absorbed at zero and
reported, never silently dropped). The log-Euler scheme advances log
wealth with the drift r + f.c - 0.5 f.R.f and the same asset noise, so it
preserves positivity at the cost of an O(dt) bias; the two schemes
converge to each other as the grid is refined.

Noise discipline: each path owns a named substream derived from
(seed, path index), and strategy evaluation never consumes randomness.
Ensembles generated with the same seed therefore share asset noise across
strategies and schemes (common random numbers), and results are identical
for any worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .kelly import SingularVolatilityError
from .market import MarketParams, psd_factor, transition_coefficients, _freeze

__all__ = [
    "StrategySpec",
    "EnsembleSummary",
    "PathEnsemble",
    "DensityProcess",
    "simulate",
    "simulate_log_euler",
    "simulate_risk_neutral",
    "self_financing_residual",
    "risk_neutral_diagnostics",
    "optimal_discounted_wealth_check",
]


@dataclass(frozen=True)
class StrategySpec:
    """Rule mapping the current market state to a fraction vector.

    Kinds: "kelly" (growth-optimal), "scaled_kelly" (scale * kelly),
    "fixed" (constant fractions), "cash" (all in the savings account).
    """

    kind: str
    scale: float = 1.0
    fixed: tuple = ()

    def __post_init__(self):
        if self.kind not in ("kelly", "scaled_kelly", "fixed", "cash"):
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if not np.isfinite(self.scale):
            raise ValueError("scale must be finite")
        if self.kind == "fixed" and not np.all(np.isfinite(self.fixed)):
            raise ValueError("fixed fractions must be finite")

    @classmethod
    def kelly(cls) -> "StrategySpec":
        return cls(kind="kelly")

    @classmethod
    def scaled_kelly(cls, scale: float) -> "StrategySpec":
        return cls(kind="scaled_kelly", scale=float(scale))

    @classmethod
    def fixed_fractions(cls, f) -> "StrategySpec":
        return cls(kind="fixed", fixed=tuple(float(v) for v in np.atleast_1d(f)))

    @classmethod
    def cash(cls) -> "StrategySpec":
        return cls(kind="cash")

    def label(self) -> str:
        if self.kind == "scaled_kelly":
            return f"scaled_kelly({self.scale:g})"
        if self.kind == "fixed":
            return "fixed(" + ",".join(f"{v:g}" for v in self.fixed) + ")"
        return self.kind


@dataclass(frozen=True)
class EnsembleSummary:
    """Terminal log-wealth statistics over non-bankrupt paths."""

    mean_log_wealth: float
    var_log_wealth: float
    se_log_wealth: float
    n_paths: int
    n_bankrupt: int


@dataclass(frozen=True, eq=False)
class PathEnsemble:
    """Seeded collection of asset / fraction / wealth trajectories.

    Arrays are indexed [path, step(, asset)] on the uniform grid `times`.
    `fractions`, `wealth` and `log_wealth` are None for price-only
    ensembles (risk-neutral simulation). `bankrupt_at` holds the absorbing
    step index per path, -1 where the path never went bankrupt.
    """

    seed: int
    scheme: str
    strategy: str | None
    horizon: float
    n_paths: int
    n_steps: int
    times: np.ndarray
    x: np.ndarray
    fractions: np.ndarray | None
    wealth: np.ndarray | None
    log_wealth: np.ndarray | None
    bankrupt_at: np.ndarray | None
    summary: EnsembleSummary | None


@dataclass(frozen=True, eq=False)
class DensityProcess:
    """Log of the measure-change density along each path; log_z[:, 0] = 0."""

    log_z: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return np.exp(self.log_z)


def _path_generators(seed: int, n_paths: int):
    children = np.random.SeedSequence(seed).spawn(n_paths)
    return [np.random.default_rng(child) for child in children]


def _chunk_slices(n_paths: int, threads: int):
    threads = max(1, min(int(threads), n_paths))
    bounds = np.linspace(0, n_paths, threads + 1).astype(int)
    return [slice(lo, hi) for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo]


def _run_chunks(worker, n_paths: int, threads: int):
    slices = _chunk_slices(n_paths, threads)
    if len(slices) == 1:
        worker(slices[0])
        return
    with ThreadPoolExecutor(max_workers=len(slices)) as pool:
        for future in [pool.submit(worker, sl) for sl in slices]:
            future.result()


class _FractionRule:
    """Vectorized per-step fraction evaluation for a fixed market.

    Uses a precomputed inverse so per-path arithmetic is elementwise and
    therefore independent of how paths are chunked across workers.
    """

    def __init__(self, params: MarketParams, strategy: StrategySpec):
        self.strategy = strategy
        n = params.n
        self.c_const = params.a + 0.5 * params.row_norms_sq - params.r
        self.b = params.b
        if strategy.kind == "fixed":
            fixed = np.asarray(strategy.fixed, dtype=float)
            if fixed.shape != (n,):
                raise ValueError(
                    f"fixed strategy needs {n} fractions, got {fixed.size}"
                )
            self.fixed = fixed
        elif strategy.kind in ("kelly", "scaled_kelly"):
            if params.is_degenerate:
                self.r_inv = np.linalg.pinv(params.covariance, rcond=1e-10)
            else:
                self.r_inv = np.linalg.inv(params.covariance)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.strategy.kind == "cash":
            return np.zeros_like(x)
        if self.strategy.kind == "fixed":
            return np.tile(self.fixed, (x.shape[0], 1))
        c = self.c_const - x * self.b
        f = c @ self.r_inv
        if self.strategy.kind == "scaled_kelly":
            f = f * self.strategy.scale
        return f


def _summarize(log_terminal: np.ndarray, bankrupt_at: np.ndarray) -> EnsembleSummary:
    valid = log_terminal[bankrupt_at < 0]
    n_bankrupt = int(np.sum(bankrupt_at >= 0))
    if valid.size == 0:
        return EnsembleSummary(np.nan, np.nan, np.nan, log_terminal.size, n_bankrupt)
    mean = float(np.mean(valid))
    var = float(np.var(valid, ddof=1)) if valid.size > 1 else 0.0
    se = float(np.sqrt(var / valid.size))
    return EnsembleSummary(mean, var, se, log_terminal.size, n_bankrupt)


def _simulate_portfolio(
    params: MarketParams,
    strategy: StrategySpec,
    horizon: float,
    n_steps: int,
    n_paths: int,
    seed: int,
    v0: float,
    threads: int,
    scheme: str,
) -> PathEnsemble:
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    if n_steps < 1 or n_paths < 1:
        raise ValueError("n_steps and n_paths must be at least 1")
    if v0 <= 0.0:
        raise ValueError("v0 must be positive")

    n = params.n
    dt = horizon / n_steps
    times = np.linspace(0.0, horizon, n_steps + 1)
    bank = np.exp(params.r * times)
    decay, shift, cov = transition_coefficients(params, dt)
    noise_map = psd_factor(cov).T  # noise @ noise_map has covariance cov
    rule = _FractionRule(params, strategy)
    rngs = _path_generators(seed, n_paths)

    x = np.empty((n_paths, n_steps + 1, n))
    x[:, 0, :] = np.log(params.s0)
    fractions = np.empty((n_paths, n_steps + 1, n))
    wealth = np.empty((n_paths, n_steps + 1))
    log_wealth = np.empty((n_paths, n_steps + 1))
    bankrupt_at = np.full(n_paths, -1, dtype=np.int64)
    cov_q = params.covariance  # quadratic-form matrix for the log scheme

    def worker(sl: slice):
        xc = x[sl]
        fc = fractions[sl]
        noise = np.empty((xc.shape[0], n_steps, n))
        for i, rng in enumerate(rngs[sl]):
            noise[i] = rng.standard_normal((n_steps, n))
        if scheme == "budget":
            vc = wealth[sl]
            vc[:, 0] = v0
            alive = np.ones(xc.shape[0], dtype=bool)
            for k in range(n_steps):
                fc[:, k, :] = rule(xc[:, k, :])
                prices = np.exp(xc[:, k, :])
                phi = fc[:, k, :] * vc[:, k, None] / prices
                phi0 = (1.0 - fc[:, k, :].sum(axis=1)) * vc[:, k] / bank[k]
                xc[:, k + 1, :] = decay * xc[:, k, :] + shift + noise[:, k, :] @ noise_map
                step_value = phi0 * (bank[k + 1] - bank[k]) + (
                    phi * (np.exp(xc[:, k + 1, :]) - prices)
                ).sum(axis=1)
                v_next = vc[:, k] + step_value
                ruined = alive & (v_next <= 0.0)
                v_next[~alive] = 0.0
                v_next[ruined] = 0.0
                bankrupt_at[sl][ruined] = k + 1
                alive &= ~ruined
                vc[:, k + 1] = v_next
            fc[:, n_steps, :] = rule(xc[:, n_steps, :])
            with np.errstate(divide="ignore"):
                log_wealth[sl] = np.log(vc)
        else:  # log-Euler in wealth, same asset noise
            lvc = log_wealth[sl]
            lvc[:, 0] = np.log(v0)
            for k in range(n_steps):
                fc[:, k, :] = rule(xc[:, k, :])
                c = (params.a + 0.5 * params.row_norms_sq - params.r) - xc[:, k, :] * params.b
                shock = noise[:, k, :] @ noise_map
                xc[:, k + 1, :] = decay * xc[:, k, :] + shift + shock
                quad = np.einsum("pi,ij,pj->p", fc[:, k, :], cov_q, fc[:, k, :])
                drift = params.r + (fc[:, k, :] * c).sum(axis=1) - 0.5 * quad
                lvc[:, k + 1] = lvc[:, k] + drift * dt + (fc[:, k, :] * shock).sum(axis=1)
            fc[:, n_steps, :] = rule(xc[:, n_steps, :])
            wealth[sl] = np.exp(lvc)
        if not (np.isfinite(xc).all() and np.isfinite(wealth[sl]).all()):
            raise FloatingPointError("NaN/inf encountered in simulated paths")

    _run_chunks(worker, n_paths, threads)

    summary = _summarize(log_wealth[:, -1], bankrupt_at)
    return PathEnsemble(
        seed=int(seed),
        scheme=scheme,
        strategy=strategy.label(),
        horizon=float(horizon),
        n_paths=n_paths,
        n_steps=n_steps,
        times=_freeze(times),
        x=_freeze(x),
        fractions=_freeze(fractions),
        wealth=_freeze(wealth),
        log_wealth=_freeze(log_wealth),
        bankrupt_at=_freeze_int(bankrupt_at),
        summary=summary,
    )


def _freeze_int(arr: np.ndarray) -> np.ndarray:
    arr = np.array(arr)
    arr.setflags(write=False)
    return arr


def simulate(
    params: MarketParams,
    strategy: StrategySpec,
    horizon: float,
    n_steps: int,
    n_paths: int,
    seed: int,
    v0: float = 1.0,
    threads: int = 1,
) -> PathEnsemble:
    """Simulate self-financing wealth with holdings frozen over each step.

    Per step: evaluate the strategy's fractions, advance the log prices by
    one exact Gaussian transition, then roll wealth through the budget
    identity dV = phi0 dB + phi . dS. Paths whose wealth hits zero or below
    are marked bankrupt and absorbed at zero (recorded, not an error).
    """
    return _simulate_portfolio(
        params, strategy, horizon, n_steps, n_paths, seed, v0, threads, "budget"
    )


def simulate_log_euler(
    params: MarketParams,
    strategy: StrategySpec,
    horizon: float,
    n_steps: int,
    n_paths: int,
    seed: int,
    v0: float = 1.0,
    threads: int = 1,
) -> PathEnsemble:
    """Simulate wealth in log space with the same asset noise as `simulate`.

    Advances log V by (r + f.c - 0.5 f.R.f) dt plus the fraction-weighted
    martingale part of the log-price step; never bankrupts.
    """
    return _simulate_portfolio(
        params, strategy, horizon, n_steps, n_paths, seed, v0, threads, "log_euler"
    )


def self_financing_residual(ensemble: PathEnsemble, params: MarketParams) -> float:
    """Max over paths and steps of |dV - phi0 dB - phi . dS| relative to V.

    Zero by construction for the budget-identity scheme; O(dt) per step for
    log-Euler output. Steps at or after bankruptcy absorption are excluded.
    """
    if ensemble.fractions is None or ensemble.wealth is None:
        raise ValueError("ensemble carries no portfolio data")
    prices = np.exp(ensemble.x)
    bank = np.exp(params.r * ensemble.times)
    f = ensemble.fractions[:, :-1, :]
    v = ensemble.wealth
    phi = f * v[:, :-1, None] / prices[:, :-1, :]
    phi0 = (1.0 - f.sum(axis=2)) * v[:, :-1] / bank[:-1]
    predicted = phi0 * (bank[1:] - bank[:-1]) + (
        phi * (prices[:, 1:, :] - prices[:, :-1, :])
    ).sum(axis=2)
    # grouped as V_k + (phi0 dB + phi.dS) to mirror the budget update exactly
    residual = np.abs(v[:, 1:] - (v[:, :-1] + predicted))
    valid = (v[:, :-1] > 0.0) & (v[:, 1:] > 0.0)
    if not valid.any():
        return 0.0
    relative = np.where(valid, residual / np.where(valid, v[:, :-1], 1.0), 0.0)
    return float(relative.max())


def simulate_risk_neutral(
    params: MarketParams,
    horizon: float,
    n_steps: int,
    n_paths: int,
    seed: int,
    threads: int = 1,
):
    """Simulate prices under the martingale measure plus the density process.

    Log prices advance with the state-independent drift r - 0.5 ||sigma_i||^2
    (derived analytically, so discounted prices are exactly driftless), and
    log Z accumulates theta . dW - 0.5 ||theta||^2 dt with theta solved from
    sigma theta = c at the current state. Returns (ensemble, density).
    """
    if params.is_degenerate:
        raise SingularVolatilityError(params.sigma_rank, params.n)
    if horizon <= 0.0:
        raise ValueError("horizon must be positive")
    if n_steps < 1 or n_paths < 1:
        raise ValueError("n_steps and n_paths must be at least 1")

    n = params.n
    dt = horizon / n_steps
    sqrt_dt = np.sqrt(dt)
    times = np.linspace(0.0, horizon, n_steps + 1)
    drift = (params.r - 0.5 * params.row_norms_sq) * dt
    noise_map = sqrt_dt * params.sigma.T  # dW @ sigma.T scaled to the step
    sigma_inv_t = np.linalg.inv(params.sigma).T
    c_const = params.a + 0.5 * params.row_norms_sq - params.r
    rngs = _path_generators(seed, n_paths)

    x = np.empty((n_paths, n_steps + 1, n))
    x[:, 0, :] = np.log(params.s0)
    log_z = np.empty((n_paths, n_steps + 1))
    log_z[:, 0] = 0.0

    def worker(sl: slice):
        xc = x[sl]
        zc = log_z[sl]
        noise = np.empty((xc.shape[0], n_steps, n))
        for i, rng in enumerate(rngs[sl]):
            noise[i] = rng.standard_normal((n_steps, n))
        for k in range(n_steps):
            c = c_const - xc[:, k, :] * params.b
            theta = c @ sigma_inv_t
            dw = sqrt_dt * noise[:, k, :]
            zc[:, k + 1] = (
                zc[:, k]
                + (theta * dw).sum(axis=1)
                - 0.5 * (theta**2).sum(axis=1) * dt
            )
            xc[:, k + 1, :] = xc[:, k, :] + drift + noise[:, k, :] @ noise_map
        if not (np.isfinite(xc).all() and np.isfinite(zc).all()):
            raise FloatingPointError("NaN/inf encountered in risk-neutral paths")

    _run_chunks(worker, n_paths, threads)

    ensemble = PathEnsemble(
        seed=int(seed),
        scheme="risk_neutral",
        strategy=None,
        horizon=float(horizon),
        n_paths=n_paths,
        n_steps=n_steps,
        times=_freeze(times),
        x=_freeze(x),
        fractions=None,
        wealth=None,
        log_wealth=None,
        bankrupt_at=None,
        summary=None,
    )
    return ensemble, DensityProcess(log_z=_freeze(log_z))


def _checkpoint_indices(n_steps: int, n_checkpoints: int) -> np.ndarray:
    grid = np.linspace(0, n_steps, n_checkpoints + 1).round().astype(int)
    return np.unique(grid[1:])


def risk_neutral_diagnostics(
    ensemble: PathEnsemble,
    density: DensityProcess,
    params: MarketParams,
    n_checkpoints: int = 5,
) -> dict:
    """Martingale battery: discounted prices and the density stay flat in mean.

    At each checkpoint t, checks |mean(S_i(t)/B_t) - S_i(0)| <= 3 SE per
    asset and |mean(Z_t) - 1| <= 3 SE. Returns a dict with per-checkpoint
    rows and an overall `passed` flag.
    """
    idx = _checkpoint_indices(ensemble.n_steps, n_checkpoints)
    times = ensemble.times[idx]
    discounted = np.exp(ensemble.x[:, idx, :] - params.r * times[None, :, None])
    z = np.exp(density.log_z[:, idx])
    n_paths = ensemble.n_paths

    rows = []
    passed = True
    for j, t in enumerate(times):
        s_mean = discounted[:, j, :].mean(axis=0)
        s_se = discounted[:, j, :].std(axis=0, ddof=1) / np.sqrt(n_paths)
        s_ok = np.abs(s_mean - params.s0) <= 3.0 * s_se
        z_mean = float(z[:, j].mean())
        z_se = float(z[:, j].std(ddof=1) / np.sqrt(n_paths))
        z_ok = abs(z_mean - 1.0) <= 3.0 * z_se
        passed = passed and bool(s_ok.all()) and z_ok
        rows.append(
            {
                "t": float(t),
                "discounted_price_mean": s_mean.tolist(),
                "discounted_price_se": s_se.tolist(),
                "price_ok": bool(s_ok.all()),
                "z_mean": z_mean,
                "z_se": z_se,
                "z_ok": z_ok,
            }
        )
    return {"checkpoints": rows, "passed": passed, "s0": params.s0.tolist()}


def optimal_discounted_wealth_check(
    params: MarketParams,
    horizon: float,
    n_steps: int,
    n_paths: int,
    seed: int,
    threads: int = 1,
) -> dict:
    """Pathwise check that discounted optimal wealth matches its exponential form.

    Runs the growth-optimal strategy under the physical measure (log-Euler
    wealth) and accumulates exp(int theta.dW + 0.5 int ||theta||^2) from the
    same noise; reports the max relative gap between B^-1 V and that
    exponential. Both discretize the same SDE, so the gap shrinks at O(dt).
    """
    ensemble = simulate_log_euler(
        params, StrategySpec.kelly(), horizon, n_steps, n_paths, seed, threads=threads
    )
    dt = horizon / n_steps
    sqrt_dt = np.sqrt(dt)
    decay, shift, cov = transition_coefficients(params, dt)
    noise_map = psd_factor(cov).T
    sigma_inv_t = np.linalg.inv(params.sigma).T
    c_const = params.a + 0.5 * params.row_norms_sq - params.r

    # Recover the per-step normal draws from the stored paths, then rebuild
    # the Brownian increments sqrt(dt) * z that the exponential form uses.
    x = ensemble.x
    shocks = x[:, 1:, :] - (decay * x[:, :-1, :] + shift)
    z = np.linalg.solve(noise_map.T, shocks.reshape(-1, params.n).T).T.reshape(
        shocks.shape
    )

    c = c_const - x[:, :-1, :] * params.b
    theta = c @ sigma_inv_t
    increments = (theta * z).sum(axis=2) * sqrt_dt + 0.5 * (theta**2).sum(axis=2) * dt
    log_exponential = np.concatenate(
        [np.zeros((n_paths, 1)), np.cumsum(increments, axis=1)], axis=1
    )
    log_discounted = ensemble.log_wealth - params.r * ensemble.times
    gap = np.abs(np.expm1(log_discounted - log_exponential))
    return {
        "max_rel_gap": float(gap.max()),
        "n_steps": int(n_steps),
        "horizon": float(horizon),
        "n_paths": int(n_paths),
        "seed": int(seed),
    }
