"""
Daily price series: loading, validation and return representations.

Prices are read from a two-column CSV (``date,close``).  Everything
downstream works in trading-day time, i.e. returns are taken between
consecutive rows regardless of calendar gaps.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass
from os import PathLike
from typing import BinaryIO, Literal

import numpy as np
from scipy import stats

from .errors import DataError

ReturnFlavor = Literal["log", "relative"]


def _frozen(a, dtype) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PriceSeries:
    """Dated, strictly positive daily closing prices."""

    dates: np.ndarray
    prices: np.ndarray

    def __post_init__(self):
        dates = _frozen(self.dates, "datetime64[D]")
        prices = _frozen(self.prices, np.float64)
        if dates.ndim != 1 or dates.shape != prices.shape:
            raise DataError("dates and prices must be 1-d and of equal length")
        if len(prices) < 2:
            raise DataError(f"a price series needs at least 2 points, got {len(prices)}")
        if np.any(np.diff(dates).astype(np.int64) <= 0):
            raise DataError("dates must be strictly increasing")
        if not np.all(np.isfinite(prices)) or np.any(prices <= 0):
            raise DataError("every price must be finite and > 0")
        object.__setattr__(self, "dates", dates)
        object.__setattr__(self, "prices", prices)

    def __len__(self) -> int:
        return len(self.prices)

    def scaled(self, factor: float) -> PriceSeries:
        return PriceSeries(self.dates, self.prices * factor)


@dataclass(frozen=True, eq=False)
class ReturnSeries:
    """Log and simple returns between consecutive prices.

    ``dates[i]`` is the date of the later price of the pair, so the series is
    one element shorter than its source.
    """

    dates: np.ndarray
    log_returns: np.ndarray
    relative_returns: np.ndarray

    def __post_init__(self):
        for name, dtype in (("dates", "datetime64[D]"), ("log_returns", np.float64),
                            ("relative_returns", np.float64)):
            object.__setattr__(self, name, _frozen(getattr(self, name), dtype))
        if not (self.dates.shape == self.log_returns.shape == self.relative_returns.shape):
            raise DataError("return arrays must have equal length")

    def __len__(self) -> int:
        return len(self.log_returns)

    def select(self, flavor: ReturnFlavor) -> np.ndarray:
        if flavor == "log":
            return self.log_returns
        if flavor == "relative":
            return self.relative_returns
        raise ValueError(f"unknown return flavor {flavor!r}")


@dataclass(frozen=True)
class SummaryStats:
    mean: float
    std: float
    skew: float
    kurtosis: float
    observations: int
    excess_kurtosis: bool = False


def load_price_series(source: BinaryIO | bytes) -> PriceSeries:
    """Parse ``date,close`` CSV bytes into a :class:`PriceSeries`.

    Rows may come in any order; they are sorted by date.  Blank or malformed
    values, non-positive prices and duplicate dates are rejected with the
    offending line number.
    """
    if isinstance(source, (bytes, bytearray)):
        source = io.BytesIO(source)
    text = io.TextIOWrapper(source, encoding="utf-8-sig", newline="")
    reader = csv.reader(text)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("empty CSV input") from None
    header = [h.strip().lower() for h in header]
    try:
        i_date, i_close = header.index("date"), header.index("close")
    except ValueError:
        raise DataError(f"line 1: header must contain 'date' and 'close', got {header}") from None

    rows: dict[dt.date, float] = {}
    for row in reader:
        line = reader.line_num
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataError(f"malformed row at line {line}: expected {len(header)} fields, got {len(row)}")
        try:
            day = dt.date.fromisoformat(row[i_date].strip())
        except ValueError:
            raise DataError(f"malformed date at line {line}: {row[i_date]!r}") from None
        try:
            close = float(row[i_close].strip())
        except ValueError:
            raise DataError(f"malformed close at line {line}: {row[i_close]!r}") from None
        if not math.isfinite(close):
            raise DataError(f"malformed close at line {line}: {row[i_close]!r}")
        if close <= 0:
            raise DataError(f"non-positive price at line {line}")
        if day in rows:
            raise DataError(f"duplicate date {day.isoformat()} at line {line}")
        rows[day] = close

    if len(rows) < 2:
        raise DataError(f"need at least 2 price rows, got {len(rows)}")
    ordered = sorted(rows.items())
    return PriceSeries(
        np.array([d for d, _ in ordered], dtype="datetime64[D]"),
        np.array([p for _, p in ordered], dtype=np.float64),
    )


def read_price_csv(path: str | PathLike) -> PriceSeries:
    try:
        with open(path, "rb") as fh:
            return load_price_series(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc


def truncate_before(series: PriceSeries, cutoff: dt.date | np.datetime64 | str) -> PriceSeries:
    """Drop every observation dated strictly before ``cutoff``."""
    keep = series.dates >= np.datetime64(cutoff, "D")
    if keep.sum() < 2:
        raise DataError(f"fewer than 2 prices remain on or after {cutoff}")
    return PriceSeries(series.dates[keep], series.prices[keep])


def compute_returns(series: PriceSeries) -> ReturnSeries:
    p = series.prices
    return ReturnSeries(
        dates=series.dates[1:],
        log_returns=np.log(p[1:] / p[:-1]),
        relative_returns=(p[1:] - p[:-1]) / p[:-1],
    )


def summary_stats(returns: ReturnSeries, flavor: ReturnFlavor = "log",
                  excess_kurtosis: bool = False) -> SummaryStats:
    """Mean, sample std, adjusted skewness and kurtosis of one return flavor.

    Kurtosis is the raw fourth standardized moment (normal = 3) unless
    ``excess_kurtosis`` is set.  Skewness and kurtosis are NaN when the
    sample has no dispersion.
    """
    x = returns.select(flavor)
    if len(x) < 4:
        raise DataError(f"summary statistics need at least 4 returns, got {len(x)}")
    if np.ptp(x) == 0.0:
        std, skew, kurt = 0.0, math.nan, math.nan
    else:
        std = float(np.std(x, ddof=1))
        skew = float(stats.skew(x, bias=False))
        kurt = float(stats.kurtosis(x, fisher=excess_kurtosis, bias=False))
    return SummaryStats(float(np.mean(x)), std, skew, kurt, len(x), excess_kurtosis)
