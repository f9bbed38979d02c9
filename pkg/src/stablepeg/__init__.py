"""Stablecoin peg stability: equilibrium zones, agent oracle and price-data statistics."""

from .core_model import (
    Action,
    Design,
    EconomyFunctions,
    FutureBelief,
    StablecoinSpec,
    UserContext,
    build_economy,
    payoff,
    redemption_value,
)
from .dynamics import (
    AgentPopulation,
    DynamicsResult,
    MarketState,
    Role,
    Shock,
    best_response,
    enumerate_equilibria,
    run_dynamics,
    simulate_run,
    zone_estimate,
)
from .equilibrium import (
    EquilibriumPoint,
    Zone,
    ZoneReport,
    check_peg_conditions,
    classify,
    equilibrium_prices,
    solve_theta_bar,
    solve_theta_circ,
    solve_theta_star,
    solve_theta_under,
    zone_diagram,
)
from .io import ScenarioConfig, load_config, load_series

__version__ = "0.1.0"
