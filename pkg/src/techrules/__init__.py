"""Profitability tests for moving-average and trading-range-break rules."""

__version__ = "0.1.0"

from .conditional import ConditionalSample, ConditionalStats, evaluate_rule
from .errors import ConfigError, DataError, NumericalError, TechRulesError
from .market_data import (
    PriceSeries,
    ReturnSeries,
    SummaryStats,
    compute_returns,
    load_price_series,
    read_price_csv,
)
from .reality_check import WrcConfig, WrcResult, wrc_curve, wrc_pvalue
from .rules import PositionSeries, RuleSpec, generate_rule_grid, parse_rule, positions_for

__all__ = [
    "ConditionalSample", "ConditionalStats", "ConfigError", "DataError", "NumericalError",
    "PositionSeries", "PriceSeries", "ReturnSeries", "RuleSpec", "SummaryStats",
    "TechRulesError", "WrcConfig", "WrcResult", "compute_returns", "evaluate_rule",
    "generate_rule_grid", "load_price_series", "parse_rule", "positions_for", "read_price_csv",
    "wrc_curve", "wrc_pvalue",
]
