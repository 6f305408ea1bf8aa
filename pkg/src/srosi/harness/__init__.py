"""Data generators, experiment drivers, and the command-line interface."""

from srosi.harness.experiment import (
    ConcentrationRow,
    ConvergenceRow,
    ExperimentConfig,
    ResultRow,
    canonical_method,
    config_from_json,
    config_to_json,
    emit_csv,
    empirical_mean_cvar,
    empirical_mean_cvar_of_losses,
    parse_csv,
    run_concentration,
    run_convergence,
    run_experiment,
)
from srosi.harness.generators import (
    InventoryFamily,
    NewsvendorFamily,
    PortfolioFamily,
    ShipmentFamily,
    family_by_name,
    gen_inventory,
    gen_newsvendor,
    gen_portfolio,
    gen_shipment,
    inventory_problem,
    newsvendor_problem,
    shipment_cost_matrix,
    shipment_problem,
)

__all__ = [
    "ConcentrationRow",
    "ConvergenceRow",
    "ExperimentConfig",
    "InventoryFamily",
    "NewsvendorFamily",
    "PortfolioFamily",
    "ResultRow",
    "ShipmentFamily",
    "canonical_method",
    "config_from_json",
    "config_to_json",
    "emit_csv",
    "empirical_mean_cvar",
    "empirical_mean_cvar_of_losses",
    "family_by_name",
    "gen_inventory",
    "gen_newsvendor",
    "gen_portfolio",
    "gen_shipment",
    "inventory_problem",
    "newsvendor_problem",
    "parse_csv",
    "run_concentration",
    "run_convergence",
    "run_experiment",
    "shipment_cost_matrix",
    "shipment_problem",
]
