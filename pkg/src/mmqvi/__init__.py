"""Optimal market making under exponential utility with a discrete spread
chain, three quote levels and market-order impulses.

The package solves the control problem backward on a lattice, backtests the
resulting policy by Monte Carlo and sweeps volatility, stamp duty and drift.
"""
from __future__ import annotations

__version__ = "0.1.0"

from .backtest import BacktestParams, MetricsSummary, StrategySpec, compute_metrics, run_monte_carlo, simulate_path
from .errors import ArtifactMismatch, ConfigError, DataError, DomainError, ResourceError
from .model import (
    FeeSchedule,
    FillModel,
    MarketModel,
    MidQuoteModel,
    OrderBounds,
    QuoteLevel,
    SpreadModel,
    baseline_model,
    validate_model,
)
from .policy_io import export_policy, import_policy
from .solver import PolicyTensor, SchemeParams, StateGrid, solve_backward

__all__ = [
    "ArtifactMismatch", "BacktestParams", "ConfigError", "DataError", "DomainError", "FeeSchedule",
    "FillModel", "MarketModel", "MetricsSummary", "MidQuoteModel", "OrderBounds", "PolicyTensor",
    "QuoteLevel", "ResourceError", "SchemeParams", "SpreadModel", "StateGrid", "StrategySpec",
    "baseline_model", "compute_metrics", "export_policy", "import_policy", "run_monte_carlo",
    "simulate_path", "solve_backward", "validate_model",
]
