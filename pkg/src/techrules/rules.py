"""
Moving-average (VMA, FMA) and trading-range-break (TRB) rules.

A rule turns a price series into a per-day market position in {-1, 0, +1}
aligned with the price calendar.  VMA positions are states read off day
``t``'s moving averages.  FMA and TRB rules are event driven: an event at
the close of day ``t`` sets the position for days ``t+1 .. t+C`` and every
event inside that hold is discarded.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Literal, NamedTuple

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import ConfigError, DataError
from .market_data import PriceSeries

RuleKind = Literal["VMA", "FMA", "TRB"]

SHORT_WINDOWS = (1, 2, 5)
VMA_LONG_WINDOWS = (20, 50, 150, 200)
FMA_LONG_WINDOWS = (50, 150, 200)
TRB_WINDOWS = (50, 150, 200)
BANDS = (0.0, 0.01)
HOLD_DAYS = 10


@dataclass(frozen=True)
class RuleSpec:
    kind: RuleKind
    n_s: int | None = None
    n_l: int | None = None
    window: int | None = None
    b: float = 0.0
    C: int | None = None

    def __post_init__(self):
        if self.kind in ("VMA", "FMA"):
            if self.n_s is None or self.n_l is None or not 1 <= self.n_s < self.n_l:
                raise ConfigError(f"{self.kind} needs 1 <= n_s < n_l, got n_s={self.n_s}, n_l={self.n_l}")
            if self.window is not None:
                raise ConfigError(f"{self.kind} takes no extrema window")
        elif self.kind == "TRB":
            if self.window is None or self.window < 1:
                raise ConfigError(f"TRB needs window >= 1, got {self.window}")
            if self.n_s is not None or self.n_l is not None:
                raise ConfigError("TRB takes no moving-average windows")
        else:
            raise ConfigError(f"unknown rule kind {self.kind!r}")
        if not self.b >= 0:
            raise ConfigError(f"band must be >= 0, got {self.b}")
        if self.kind == "VMA":
            if self.C is not None:
                raise ConfigError("VMA rules have no holding period")
        elif self.C is None or self.C < 1:
            raise ConfigError(f"{self.kind} needs a holding period C >= 1, got {self.C}")

    @property
    def label(self) -> str:
        b = f"{self.b:g}"
        if self.kind == "VMA":
            return f"VMA({self.n_s},{self.n_l},{b})"
        if self.kind == "FMA":
            return f"FMA({self.n_s},{self.n_l},{b},{self.C})"
        return f"TRB({self.window},{b},{self.C})"

    def __str__(self) -> str:
        return self.label


_LABEL = re.compile(r"^\s*(VMA|FMA|TRB)\s*\(([^)]*)\)\s*$", re.IGNORECASE)


def parse_rule(text: str) -> RuleSpec:
    """Inverse of :attr:`RuleSpec.label`.

    ``FMA`` and ``TRB`` labels may omit the holding period, which then
    defaults to 10 days.
    """
    m = _LABEL.match(text)
    if not m:
        raise ConfigError(f"cannot parse rule {text!r}")
    kind = m.group(1).upper()
    try:
        args = [float(a) for a in m.group(2).split(",")]
    except ValueError:
        raise ConfigError(f"cannot parse rule {text!r}") from None

    def as_int(x: float) -> int:
        if x != int(x):
            raise ConfigError(f"window and holding arguments must be integers in {text!r}")
        return int(x)

    if kind == "VMA" and len(args) == 3:
        return RuleSpec("VMA", n_s=as_int(args[0]), n_l=as_int(args[1]), b=args[2])
    if kind == "FMA" and len(args) in (3, 4):
        C = as_int(args[3]) if len(args) == 4 else HOLD_DAYS
        return RuleSpec("FMA", n_s=as_int(args[0]), n_l=as_int(args[1]), b=args[2], C=C)
    if kind == "TRB" and len(args) in (2, 3):
        C = as_int(args[2]) if len(args) == 3 else HOLD_DAYS
        return RuleSpec("TRB", window=as_int(args[0]), b=args[1], C=C)
    raise ConfigError(f"wrong number of arguments in {text!r}")


def generate_rule_grid() -> list[RuleSpec]:
    """The 48-rule grid: 24 VMA, 18 FMA and 6 TRB rules.

    Ordered VMA, FMA, TRB and lexicographically by parameters within a kind.
    """
    grid = [RuleSpec("VMA", n_s=s, n_l=l, b=b)
            for s in SHORT_WINDOWS for l in VMA_LONG_WINDOWS for b in BANDS]
    grid += [RuleSpec("FMA", n_s=s, n_l=l, b=b, C=HOLD_DAYS)
             for s in SHORT_WINDOWS for l in FMA_LONG_WINDOWS for b in BANDS]
    grid += [RuleSpec("TRB", window=w, b=b, C=HOLD_DAYS)
             for w in TRB_WINDOWS for b in BANDS]
    return grid


class SignalEvent(NamedTuple):
    t: int
    direction: Literal["buy", "sell"]


@dataclass(frozen=True, eq=False)
class PositionSeries:
    """Per-day positions; ``positions[t] == 0`` for every ``t < warmup``."""

    positions: np.ndarray
    warmup: int
    events: tuple[SignalEvent, ...] = ()

    def __post_init__(self):
        pos = np.array(self.positions, dtype=np.int8)
        if pos.ndim != 1 or not np.isin(pos, (-1, 0, 1)).all():
            raise ValueError("positions must be a 1-d sequence of -1, 0, +1")
        if self.warmup < 0 or np.any(pos[: self.warmup]):
            raise ValueError("positions must be zero before warmup")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)

    def __len__(self) -> int:
        return len(self.positions)


def _prices(prices: PriceSeries | np.ndarray) -> np.ndarray:
    if isinstance(prices, PriceSeries):
        return prices.prices
    return np.asarray(prices, dtype=np.float64)


def moving_average(prices: PriceSeries | np.ndarray, n: int, t: int) -> float:
    """Arithmetic mean of the ``n`` prices ending at day ``t`` (0-based)."""
    p = _prices(prices)
    if n < 1 or t < n - 1 or t >= len(p):
        raise DataError(f"moving average of window {n} undefined at day {t}")
    return float(rolling_mean(p[t - n + 1 : t + 1], n)[-1])


def rolling_mean(prices: PriceSeries | np.ndarray, n: int) -> np.ndarray:
    """Trailing ``n``-day mean for every day; NaN where history is short.

    Each window is averaged as deviations from its newest price, so a flat
    window returns that price exactly and ``n == 1`` is the identity.
    """
    p = _prices(prices)
    out = np.full(len(p), np.nan)
    if len(p) < n:
        return out
    win = sliding_window_view(p, n)
    last = win[:, -1]
    out[n - 1 :] = last + (win - last[:, None]).sum(axis=1) / n
    return out


def trailing_extrema(prices: PriceSeries | np.ndarray, window: int) -> tuple[np.ndarray, np.ndarray]:
    """Max and min over the ``window`` days strictly before each day.

    Entry ``t`` covers days ``t-window .. t-1``; NaN for ``t < window``.
    """
    p = _prices(prices)
    hi = np.full(len(p), np.nan)
    lo = np.full(len(p), np.nan)
    if len(p) > window:
        win = sliding_window_view(p[:-1], window)
        hi[window:] = win.max(axis=1)
        lo[window:] = win.min(axis=1)
    return hi, lo


def _hold(n_days: int, buys: np.ndarray, sells: np.ndarray, C: int, first_event: int):
    """Turn event flags into fixed-length holds, ignoring events inside a hold."""
    pos = np.zeros(n_days, dtype=np.int8)
    events = []
    free_from = first_event
    for t in np.flatnonzero(buys | sells):
        if t < free_from:
            continue
        sign = 1 if buys[t] else -1
        pos[t + 1 : t + 1 + C] = sign
        events.append(SignalEvent(int(t), "buy" if sign > 0 else "sell"))
        # a new event on day t + C opens a hold starting t + C + 1: no overlap
        free_from = t + C
    return pos, tuple(events)


def vma_positions(prices: PriceSeries | np.ndarray, spec: RuleSpec) -> PositionSeries:
    if spec.kind != "VMA":
        raise ConfigError(f"not a VMA rule: {spec}")
    p = _prices(prices)
    if len(p) <= spec.n_l:
        raise DataError(f"{spec} needs more than {spec.n_l} prices, got {len(p)}")
    ms = rolling_mean(p, spec.n_s)
    ml = rolling_mean(p, spec.n_l)
    warmup = spec.n_l - 1
    pos = np.zeros(len(p), dtype=np.int8)
    s, l = ms[warmup:], ml[warmup:]
    pos[warmup:] = np.where(s > (1 + spec.b) * l, 1, np.where(s < (1 - spec.b) * l, -1, 0))
    return PositionSeries(pos, warmup)


def fma_positions(prices: PriceSeries | np.ndarray, spec: RuleSpec) -> PositionSeries:
    if spec.kind != "FMA":
        raise ConfigError(f"not an FMA rule: {spec}")
    p = _prices(prices)
    if len(p) <= spec.n_l + spec.C:
        raise DataError(f"{spec} needs more than {spec.n_l + spec.C} prices, got {len(p)}")
    ms = rolling_mean(p, spec.n_s)
    ml = rolling_mean(p, spec.n_l)
    upper = (1 + spec.b) * ml
    lower = (1 - spec.b) * ml
    first = spec.n_l  # m(t-1, n_l) must exist
    buys = np.zeros(len(p), dtype=bool)
    sells = np.zeros(len(p), dtype=bool)
    buys[first:] = (ms[first - 1 : -1] < upper[first - 1 : -1]) & (ms[first:] > upper[first:])
    sells[first:] = (ms[first - 1 : -1] > lower[first - 1 : -1]) & (ms[first:] < lower[first:])
    pos, events = _hold(len(p), buys, sells, spec.C, first)
    return PositionSeries(pos, first + 1, events)


def trb_positions(prices: PriceSeries | np.ndarray, spec: RuleSpec) -> PositionSeries:
    if spec.kind != "TRB":
        raise ConfigError(f"not a TRB rule: {spec}")
    p = _prices(prices)
    if len(p) <= spec.window + spec.C:
        raise DataError(f"{spec} needs more than {spec.window + spec.C} prices, got {len(p)}")
    hi, lo = trailing_extrema(p, spec.window)
    first = spec.window
    # both sides of the crossing are tested against day t's trailing window
    resistance = (1 + spec.b) * hi[first:]
    support = (1 - spec.b) * lo[first:]
    buys = np.zeros(len(p), dtype=bool)
    sells = np.zeros(len(p), dtype=bool)
    buys[first:] = (p[first - 1 : -1] < resistance) & (p[first:] > resistance)
    sells[first:] = (p[first - 1 : -1] > support) & (p[first:] < support)
    pos, events = _hold(len(p), buys, sells, spec.C, first)
    return PositionSeries(pos, first + 1, events)


def positions_for(prices: PriceSeries | np.ndarray, spec: RuleSpec) -> PositionSeries:
    if spec.kind == "VMA":
        return vma_positions(prices, spec)
    if spec.kind == "FMA":
        return fma_positions(prices, spec)
    return trb_positions(prices, spec)


def apply_short_constraint(positions: PositionSeries, short_allowed: bool) -> PositionSeries:
    if short_allowed:
        return positions
    return PositionSeries(np.maximum(positions.positions, 0), positions.warmup, positions.events)
