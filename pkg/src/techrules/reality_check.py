"""
White's Reality Check against a buy-and-hold benchmark.

Each rule's daily performance is its log growth net of proportional costs
minus the benchmark's log growth.  The best rule's mean performance is
compared with its stationary-bootstrap distribution under the recentred
null, giving a p-value that accounts for searching over every rule.

Random streams: replication ``b`` draws from
``np.random.Generator(PCG64(SeedSequence(seed).spawn(B)[b]))``, first ``n``
uniforms for the block-restart test and then ``n`` integers for restart
positions.  The same stream is reused for every rule, cost and short-sale
mode, so results do not depend on evaluation order or thread count.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .conditional import evaluation_slice
from .errors import ConfigError, NumericalError
from .rules import PositionSeries


@dataclass(frozen=True)
class WrcConfig:
    R: int = 201
    q: float = 0.1
    c: float = 0.0
    B: int = 500
    short_allowed: bool = True
    seed: int = 0

    def __post_init__(self):
        if not 0 < self.q <= 1:
            raise ConfigError(f"q must lie in (0, 1], got {self.q}")
        if not self.c >= 0:
            raise ConfigError(f"cost rate must be >= 0, got {self.c}")
        if self.B < 1:
            raise ConfigError(f"need at least one bootstrap replication, got {self.B}")
        if self.R < 2:
            raise ConfigError(f"first evaluation day must be >= 2, got {self.R}")


@dataclass(frozen=True, eq=False)
class WrcResult:
    f_bar: np.ndarray
    V_bar: float
    best_rule: int
    p_value: float
    config: WrcConfig
    n: int
    V_star: np.ndarray = field(repr=False)


def _as_positions(x: PositionSeries | np.ndarray) -> np.ndarray:
    return x.positions if isinstance(x, PositionSeries) else np.asarray(x)


def performance_series(y: np.ndarray, I_k: PositionSeries | np.ndarray,
                       I_0: PositionSeries | np.ndarray | None = None, c: float = 0.0,
                       R: int = 2, T: int | None = None, label: str = "rule",
                       dates: np.ndarray | None = None) -> np.ndarray:
    """Daily performance of one rule against the benchmark over days ``R .. T``.

    ``y`` holds simple returns (one fewer than positions); ``I_k`` and ``I_0``
    are positions on the price calendar, so ``y[j]`` is earned by position
    ``j``.  A position change costs ``c`` per unit, charged on the day the new
    position is first held.  ``I_0`` defaults to always long.
    """
    y = np.asarray(y, dtype=np.float64)
    pos = _as_positions(I_k).astype(np.float64)
    bench = np.ones_like(pos) if I_0 is None else _as_positions(I_0).astype(np.float64)
    if len(pos) != len(y) + 1 or len(bench) != len(pos):
        raise ValueError("positions must be one longer than the return series")
    T = len(pos) if T is None else T
    if T > len(pos):
        raise ConfigError(f"last evaluation day {T} is beyond the series ({len(pos)} days)")
    window = evaluation_slice(T, R)
    prev = np.concatenate(([0.0], pos[:-1]))
    y, held, before, b = y[window], pos[window], prev[window], bench[window]

    gross = 1.0 + y * held - c * np.abs(held - before)
    bench_gross = 1.0 + y * b
    bad = np.flatnonzero((gross <= 0) | (bench_gross <= 0))
    if len(bad):
        j = bad[0] + window.start
        when = str(dates[j]) if dates is not None else f"day {j + 2}"
        raise NumericalError(
            f"{label}: non-positive growth factor {min(gross[bad[0]], bench_gross[bad[0]]):.6g} on {when}")
    return np.log(gross) - np.log(bench_gross)


def mean_performance(row: np.ndarray) -> float:
    row = np.asarray(row, dtype=np.float64)
    if row.size == 0:
        raise ValueError("empty performance row")
    return float(row.mean())


def _block_indices(n: int, q: float, rng: np.random.Generator) -> np.ndarray:
    u = rng.random(n)
    fresh = rng.integers(0, n, size=n)
    t = np.arange(n)
    restart = u < q
    restart[0] = True
    start = np.maximum.accumulate(np.where(restart, t, 0))
    return (fresh[start] + (t - start)) % n


def stationary_bootstrap_indices(R: int, T: int, q: float,
                                 rng: np.random.Generator | int | None = None) -> np.ndarray:
    """One stationary-bootstrap resample of the day indices ``R .. T``.

    The first index is uniform; afterwards, with probability ``q`` a fresh
    uniform index starts a new block, otherwise the previous index is
    advanced by one, wrapping from ``T`` back to ``R``.  Block lengths are
    geometric with mean ``1/q``.
    """
    if not 0 < q <= 1:
        raise ConfigError(f"q must lie in (0, 1], got {q}")
    if R > T:
        raise ConfigError(f"empty index range [{R}, {T}]")
    rng = np.random.default_rng(rng)
    return R + _block_indices(T - R + 1, q, rng)


def bootstrap_index_matrix(n: int, q: float, B: int, seed: int) -> np.ndarray:
    """``B`` resamples of ``range(n)``, one independent substream per row."""
    if not 0 < q <= 1:
        raise ConfigError(f"q must lie in (0, 1], got {q}")
    streams = np.random.SeedSequence(seed).spawn(B)
    out = np.empty((B, n), dtype=np.intp)
    for b, ss in enumerate(streams):
        out[b] = _block_indices(n, q, np.random.Generator(np.random.PCG64(ss)))
    return out


def bootstrap_means(F: np.ndarray, indices: np.ndarray, jobs: int = 1) -> np.ndarray:
    """Resampled mean performance, shape ``(B, K)``.

    Every rule in a replication is resampled with the same day indices.
    """
    F = np.asarray(F, dtype=np.float64)
    if F.ndim != 2:
        raise ValueError("performance matrix must be 2-d (rules x days)")
    K = F.shape[0]
    B, n = indices.shape
    if n != F.shape[1]:
        raise ValueError(f"index length {n} does not match {F.shape[1]} evaluation days")
    # days x rules, so a replication gathers whole rows.  Reducing over axis 0
    # adds days in resample order for each rule, the same whatever K is; a
    # single rule is padded to two columns so numpy cannot switch to its
    # pairwise 1-d sum.
    FT = np.zeros((n, max(K, 2)))
    FT[:, :K] = F.T
    out = np.empty((B, K))

    def work(rows: range):
        for b in rows:
            out[b] = FT[indices[b]].sum(axis=0)[:K] / n

    if jobs <= 1 or B < 2:
        work(range(B))
    else:
        chunks = [range(i, B, jobs) for i in range(jobs)]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            list(pool.map(work, chunks))
    return out


def _check_matrix(F: np.ndarray) -> np.ndarray:
    F = np.asarray(F, dtype=np.float64)
    if F.ndim == 1:
        F = F[None, :]
    if F.ndim != 2 or F.shape[0] == 0 or F.shape[1] == 0:
        raise ValueError("performance matrix must be non-empty rules x days")
    if not np.all(np.isfinite(F)):
        raise NumericalError("performance matrix contains non-finite values")
    return F


def _indices_for(F: np.ndarray, config: WrcConfig, indices: np.ndarray | None) -> np.ndarray:
    if indices is None:
        return bootstrap_index_matrix(F.shape[1], config.q, config.B, config.seed)
    if indices.shape != (config.B, F.shape[1]):
        raise ValueError(f"indices shape {indices.shape} != {(config.B, F.shape[1])}")
    return indices


def wrc_from_means(f_bar: np.ndarray, boot: np.ndarray, config: WrcConfig, n: int) -> WrcResult:
    root_n = math.sqrt(n)
    V_bar = float(np.max(root_n * f_bar))
    V_star = np.max(root_n * (boot - f_bar), axis=1)
    return WrcResult(
        f_bar=f_bar,
        V_bar=V_bar,
        best_rule=int(np.argmax(f_bar)),
        p_value=float(np.count_nonzero(V_star > V_bar)) / len(V_star),
        config=config,
        n=n,
        V_star=V_star,
    )


def wrc_pvalue(F: np.ndarray, config: WrcConfig, indices: np.ndarray | None = None,
               jobs: int = 1) -> WrcResult:
    """Reality Check p-value for the best of the ``K`` rows of ``F``.

    ``p = #{b : V*_b > V}/B`` with ``V = max_k sqrt(n) mean(f_k)`` and
    ``V*_b = max_k sqrt(n) (mean(f*_k) - mean(f_k))``.
    """
    F = _check_matrix(F)
    idx = _indices_for(F, config, indices)
    f_bar = F.mean(axis=1)
    return wrc_from_means(f_bar, bootstrap_means(F, idx, jobs), config, F.shape[1])


def curve_from_means(f_bar: np.ndarray, boot: np.ndarray, n: int,
                     order: np.ndarray | None = None) -> list[tuple[int, float]]:
    K = len(f_bar)
    order = np.arange(K) if order is None else np.asarray(order)
    if sorted(order.tolist()) != list(range(K)):
        raise ConfigError("rule ordering must be a permutation of all rule indices")
    root_n = math.sqrt(n)
    V_bar = np.maximum.accumulate(root_n * f_bar[order])
    V_star = np.maximum.accumulate(root_n * (boot - f_bar)[:, order], axis=1)
    p = np.count_nonzero(V_star > V_bar, axis=0) / boot.shape[0]
    return [(m + 1, float(p[m])) for m in range(K)]


def wrc_curve(F: np.ndarray, config: WrcConfig, order=None,
              indices: np.ndarray | None = None, jobs: int = 1) -> list[tuple[int, float]]:
    """p-value using only the first ``m`` rules of ``order``, for ``m = 1..K``.

    All points share one set of bootstrap resamples.
    """
    F = _check_matrix(F)
    idx = _indices_for(F, config, indices)
    return curve_from_means(F.mean(axis=1), bootstrap_means(F, idx, jobs), F.shape[1], order)


def performance_matrix(relative_returns: np.ndarray, positions: list[PositionSeries],
                       config: WrcConfig, labels: list[str] | None = None,
                       dates: np.ndarray | None = None) -> np.ndarray:
    """Stack every rule's performance row, applying the short-sale constraint."""
    rows = []
    for k, ps in enumerate(positions):
        pos = _as_positions(ps)
        if not config.short_allowed:
            pos = np.maximum(pos, 0)
        label = labels[k] if labels else f"rule {k}"
        rows.append(performance_series(relative_returns, pos, None, config.c, config.R,
                                       label=label, dates=dates))
    return np.vstack(rows)
