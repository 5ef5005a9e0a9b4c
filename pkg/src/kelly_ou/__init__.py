"""Growth-optimal portfolios and wealth simulation for mean-reverting markets."""

from .kelly import (
    FractionVector,
    Holdings,
    RiskPremium,
    SingularVolatilityError,
    growth_rate,
    kelly_fraction,
    market_price_of_risk,
    mean_variance_objective,
    replicating_holdings,
)
from .market import (
    GaussianStep,
    MarketParams,
    MarketState,
    drift_mu,
    excess_return,
    sample_step,
    stationary_mean_log,
    transition_law,
)
from .simulate import (
    DensityProcess,
    PathEnsemble,
    StrategySpec,
    optimal_discounted_wealth_check,
    self_financing_residual,
    simulate,
    simulate_log_euler,
    simulate_risk_neutral,
)
from .structures import (
    StructureKind,
    bidiagonal_limit_expected_total_fraction,
    bidiagonal_limit_oracle,
    build_sigma,
    limit_expected_total_fraction,
    triangular_expected_total_fraction,
    triangular_fractions,
)

__version__ = "0.1.0"
