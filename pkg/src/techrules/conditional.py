"""
Returns conditioned on rule positions, and the t-tests on them.

Days are numbered from 1 as prices are listed, so day ``d`` closes at
``prices[d-1]`` and its return is the change from day ``d-1``.  The
evaluation window is days ``R .. T`` with ``T`` the last day.  The return of
day ``d`` is credited to the position taken at the close of day ``d-1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import ConfigError
from .market_data import ReturnSeries
from .rules import PositionSeries, RuleSpec

SIGNIFICANCE_LEVELS = (0.10, 0.05, 0.01)
_CRITICAL = tuple(float(stats.norm.ppf(1 - a / 2)) for a in SIGNIFICANCE_LEVELS)


@dataclass(frozen=True, eq=False)
class ConditionalSample:
    long_returns: np.ndarray
    short_returns: np.ndarray
    N: int
    mu: float
    sigma2: float

    @property
    def N_l(self) -> int:
        return len(self.long_returns)

    @property
    def N_s(self) -> int:
        return len(self.short_returns)

    def swapped(self) -> ConditionalSample:
        return ConditionalSample(self.short_returns, self.long_returns, self.N, self.mu, self.sigma2)


@dataclass(frozen=True)
class ConditionalStats:
    rule: RuleSpec | None
    N_l: int
    N_s: int
    mu_l: float
    mu_s: float
    delta_mu: float
    t_l: float
    t_s: float
    t_ls: float
    sigma_l: float
    sigma_s: float
    p_l: float
    p_s: float
    s_l: float
    s_s: float


def evaluation_slice(n_prices: int, R: int) -> slice:
    """Indices into return and position arrays covering days ``R .. T``.

    ``positions[j]`` pairs with ``returns[j]`` (the move from price ``j`` to
    ``j+1``), so the window is ``j = R-2 .. T-2``.
    """
    if R < 2:
        raise ConfigError(f"first evaluation day must be >= 2 (day 1 has no return), got {R}")
    if R > n_prices:
        raise ConfigError(f"first evaluation day {R} is beyond the last day {n_prices}")
    return slice(R - 2, n_prices - 1)


def align_returns(returns: ReturnSeries | np.ndarray, positions: PositionSeries | np.ndarray,
                  R: int = 2) -> ConditionalSample:
    r = returns.log_returns if isinstance(returns, ReturnSeries) else np.asarray(returns, float)
    pos = positions.positions if isinstance(positions, PositionSeries) else np.asarray(positions)
    if len(pos) != len(r) + 1:
        raise ValueError(f"{len(pos)} positions do not match {len(r)} returns (+1 expected)")
    window = evaluation_slice(len(pos), R)
    r, held = r[window], pos[window]
    return ConditionalSample(
        long_returns=r[held == 1],
        short_returns=r[held == -1],
        N=len(r),
        mu=float(np.mean(r)),
        sigma2=float(np.var(r, ddof=1)) if len(r) > 1 else math.nan,
    )


def _t_vs_mean(side: np.ndarray, s: ConditionalSample) -> float:
    if len(side) == 0 or not s.sigma2 > 0:
        return math.nan
    return (float(np.mean(side)) - s.mu) / math.sqrt(s.sigma2 / len(side) + s.sigma2 / s.N)


def t_stats(sample: ConditionalSample) -> tuple[float, float]:
    """Conditional-minus-unconditional mean t statistics ``(t_l, t_s)``."""
    return _t_vs_mean(sample.long_returns, sample), _t_vs_mean(sample.short_returns, sample)


def t_stat_long_short(sample: ConditionalSample) -> float:
    if sample.N_l == 0 or sample.N_s == 0 or not sample.sigma2 > 0:
        return math.nan
    diff = float(np.mean(sample.long_returns)) - float(np.mean(sample.short_returns))
    return diff / math.sqrt(sample.sigma2 / sample.N_l + sample.sigma2 / sample.N_s)


def significance(t: float) -> int:
    """Number of two-sided normal levels (10%, 5%, 1%) at which ``t`` rejects."""
    if not math.isfinite(t):
        return 0
    return sum(abs(t) > c for c in _CRITICAL)


def stars(t: float) -> str:
    return "*" * significance(t)


def _std(x: np.ndarray) -> float:
    if len(x) < 2:
        return math.nan
    return float(np.std(x, ddof=1))


def sharpe_ratios(sample: ConditionalSample, r_f: float = 0.0) -> tuple[float, float]:
    out = []
    for side in (sample.long_returns, sample.short_returns):
        sd = _std(side)
        out.append((float(np.mean(side)) - r_f) / sd if sd > 0 else math.nan)
    return out[0], out[1]


def positive_fraction(sample: ConditionalSample) -> tuple[float, float]:
    """Share of strictly positive returns on each side; zeros do not count."""
    return tuple(
        float(np.count_nonzero(side > 0)) / len(side) if len(side) else math.nan
        for side in (sample.long_returns, sample.short_returns)
    )


def stats_from_sample(sample: ConditionalSample, r_f: float = 0.0,
                      rule: RuleSpec | None = None) -> ConditionalStats:
    mu_l = float(np.mean(sample.long_returns)) if sample.N_l else math.nan
    mu_s = float(np.mean(sample.short_returns)) if sample.N_s else math.nan
    t_l, t_s = t_stats(sample)
    s_l, s_s = sharpe_ratios(sample, r_f)
    p_l, p_s = positive_fraction(sample)
    return ConditionalStats(
        rule=rule,
        N_l=sample.N_l,
        N_s=sample.N_s,
        mu_l=mu_l,
        mu_s=mu_s,
        delta_mu=mu_l - mu_s,
        t_l=t_l,
        t_s=t_s,
        t_ls=t_stat_long_short(sample),
        sigma_l=_std(sample.long_returns),
        sigma_s=_std(sample.short_returns),
        p_l=p_l,
        p_s=p_s,
        s_l=s_l,
        s_s=s_s,
    )


def evaluate_rule(returns: ReturnSeries, positions: PositionSeries, r_f: float = 0.0,
                  R: int = 2, rule: RuleSpec | None = None) -> ConditionalStats:
    """One results row for a rule: means, t-tests, dispersion, hit rates, Sharpe.

    Values are stored unscaled; display factors belong to the report layer.
    """
    return stats_from_sample(align_returns(returns, positions, R), r_f, rule)
