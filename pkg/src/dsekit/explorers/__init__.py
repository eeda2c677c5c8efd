"""Ten design-space explorers behind one budgeted, seeded interface."""

from .base import (
    Budget,
    BudgetedEvaluator,
    ExplorationResult,
    ExplorerId,
    PortfolioResult,
    explore,
    portfolio_seed,
    run_portfolio,
    score_results,
)

__all__ = [
    "Budget",
    "BudgetedEvaluator",
    "ExplorationResult",
    "ExplorerId",
    "PortfolioResult",
    "explore",
    "portfolio_seed",
    "run_portfolio",
    "score_results",
]
