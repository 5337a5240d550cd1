import math

import numpy as np
import pytest

from oracles import brute_performance, literal_bootstrap, random_walk
from techrules.errors import ConfigError, NumericalError
from techrules.market_data import PriceSeries, compute_returns
from techrules.reality_check import (
    WrcConfig,
    _block_indices,
    bootstrap_index_matrix,
    bootstrap_means,
    mean_performance,
    performance_matrix,
    performance_series,
    stationary_bootstrap_indices,
    wrc_curve,
    wrc_pvalue,
)
from techrules.rules import generate_rule_grid, positions_for

# log(1.007) - log(1.01)
ENTRY_COST_WORKED = -0.002974717116742954


def test_identity_strategy_is_zero():
    y = np.random.default_rng(0).normal(0, 0.02, 99)
    f = performance_series(y, np.ones(100), np.ones(100), c=0.0, R=2)
    assert np.all(f == 0.0) and len(f) == 99


def test_entry_cost_example():
    y = np.array([0.0, 0.01])
    f = performance_series(y, np.array([0, 1, 1]), None, c=0.003, R=3)
    assert f.tolist() == [pytest.approx(ENTRY_COST_WORKED, abs=1e-15)]


def test_flip_costs_twice():
    y = np.array([0.0, 0.02])
    f = performance_series(y, np.array([-1, 1, 1]), None, c=0.003, R=3)
    assert f[0] == pytest.approx(math.log(1 + 0.02 - 0.006) - math.log(1.02), abs=1e-15)
    g = performance_series(y, np.array([-1, 1, 1]), None, c=0.0, R=3)
    assert g[0] == 0.0


def test_first_day_cost_uses_warmup_history():
    y = np.array([0.0, 0.0, 0.01])
    # flat during warmup, long from the first evaluated day: entry is charged
    f = performance_series(y, np.array([0, 0, 1, 1]), None, c=0.01, R=4)
    assert f[0] == pytest.approx(math.log(1.0) - math.log(1.01), abs=1e-15)
    f = performance_series(y, np.array([0, 1, 1, 1]), None, c=0.01, R=4)
    assert f[0] == 0.0


@pytest.mark.parametrize("c", [0.0, 0.003, 0.01])
def test_performance_matches_loop(c):
    rng = np.random.default_rng(4)
    y = rng.normal(0, 0.02, 400)
    pos = rng.integers(-1, 2, 401)
    bench = rng.integers(0, 2, 401)
    f = performance_series(y, pos, bench, c=c, R=30)
    np.testing.assert_allclose(f, brute_performance(y, pos.tolist(), c, 30, bench.tolist()),
                               rtol=0, atol=1e-15)


def test_non_positive_growth_is_reported():
    y = np.array([0.01, 1.2, 0.0])
    dates = np.array(["2000-01-04", "2000-01-05", "2000-01-06"], "datetime64[D]")
    with pytest.raises(NumericalError, match="TRB.*2000-01-05"):
        performance_series(y, np.array([0, -1, -1, -1]), None, 0.0, R=2, label="TRB(50,0,10)",
                           dates=dates)


def test_mean_performance():
    assert mean_performance(np.zeros(7)) == 0.0
    assert mean_performance(np.array([0.01, -0.01])) == 0.0
    row = np.random.default_rng(1).normal(size=100)
    assert abs(mean_performance(row) - math.fsum(row) / 100) < 1e-15
    with pytest.raises(ValueError):
        mean_performance(np.array([]))


@pytest.mark.parametrize("q", [0.01, 0.1, 0.5, 1.0])
def test_vectorized_bootstrap_is_the_literal_procedure(q):
    n = 3000
    a = np.random.default_rng(9)
    b = np.random.default_rng(9)
    got = _block_indices(n, q, a)
    u = b.random(n)
    fresh = b.integers(0, n, size=n)
    assert got.tolist() == literal_bootstrap(n, q, u, fresh)


def test_bootstrap_index_range_and_wrap():
    idx = stationary_bootstrap_indices(201, 5276, 0.01, 3)
    assert len(idx) == 5276 - 201 + 1
    assert idx.min() >= 201 and idx.max() <= 5276
    step = np.diff(idx)
    # wrapping moves from T back to R
    assert set(step[(idx[:-1] == 5276) & (step < 0)]) <= {201 - 5276}
    with pytest.raises(ConfigError):
        stationary_bootstrap_indices(1, 10, 0.0)
    with pytest.raises(ConfigError):
        stationary_bootstrap_indices(11, 10, 0.5)


def test_iid_when_q_is_one():
    rng = np.random.default_rng(5)
    idx = np.concatenate([stationary_bootstrap_indices(1, 50, 1.0, rng) for _ in range(4000)])
    successor = (idx[1:] - 1) % 50 == idx[:-1] % 50
    assert abs(successor.mean() - 1 / 50) < 0.005


def test_index_matrix_streams_are_independent_of_B():
    a = bootstrap_index_matrix(100, 0.1, 5, seed=1)
    b = bootstrap_index_matrix(100, 0.1, 5, seed=1)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, bootstrap_index_matrix(100, 0.1, 5, seed=2))
    assert not np.array_equal(a[0], a[1])


def test_all_zero_matrix():
    F = np.zeros((48, 300))
    res = wrc_pvalue(F, WrcConfig(B=50, q=0.1, seed=1))
    assert res.V_bar == 0.0 and np.all(res.V_star == 0.0) and res.p_value == 0.0
    curve = wrc_curve(F, WrcConfig(B=50, q=0.1, seed=1))
    assert [p for _, p in curve] == [0.0] * 48
    assert [m for m, _ in curve] == list(range(1, 49))


def test_underperforming_rule():
    rng = np.random.default_rng(8)
    F = rng.normal(0, 0.01, (1, 2000))
    F = F - F.mean() - 0.001
    res = wrc_pvalue(F, WrcConfig(B=500, q=0.1, seed=3))
    assert res.V_bar < 0 and res.p_value > 0.5
    assert res.f_bar[0] == pytest.approx(-0.001, abs=1e-15)


def test_deterministic_and_thread_independent():
    F = np.random.default_rng(0).normal(0, 0.01, (48, 800))
    cfg = WrcConfig(B=200, q=0.1, seed=77)
    a = wrc_pvalue(F, cfg)
    b = wrc_pvalue(F, cfg, jobs=4)
    assert a.p_value == b.p_value
    assert np.array_equal(a.V_star, b.V_star)


def test_rows_share_indices():
    rng = np.random.default_rng(12)
    x = rng.normal(size=500)
    F = np.vstack([x, 2 * x, x + 1])
    idx = bootstrap_index_matrix(500, 0.2, 20, seed=4)
    m = bootstrap_means(F, idx)
    np.testing.assert_allclose(m[:, 1], 2 * m[:, 0], rtol=1e-12)
    np.testing.assert_allclose(m[:, 2], m[:, 0] + 1, rtol=0, atol=1e-12)
    single = bootstrap_means(F[1:2], idx)
    assert np.array_equal(single[:, 0], m[:, 1])


def test_curve_endpoint_and_duplicates():
    rng = np.random.default_rng(21)
    F = rng.normal(0.0002, 0.01, (12, 600))
    cfg = WrcConfig(B=300, q=0.1, seed=5)
    curve = wrc_curve(F, cfg)
    assert curve[-1][1] == wrc_pvalue(F, cfg).p_value
    assert curve[0][1] == wrc_pvalue(F[:1], cfg).p_value
    order = np.arange(12)[::-1]
    rev = wrc_curve(F, cfg, order)
    assert rev[-1][1] == curve[-1][1]
    assert rev[0][1] == wrc_pvalue(F[11:], cfg).p_value

    dup = np.vstack([F[:5], F[2:3], F[5:]])
    d = [p for _, p in wrc_curve(dup, cfg)]
    p = [p for _, p in curve]
    assert d[:5] == p[:5] and d[5] == p[4] and d[6:] == p[5:]
    with pytest.raises(ConfigError):
        wrc_curve(F, cfg, order=[0, 0, 1])


def test_dominant_row_gives_single_row_pvalue():
    rng = np.random.default_rng(31)
    top = rng.normal(0.0003, 0.01, 700)
    F = np.vstack([top] + [top - d for d in (0.0001, 0.0005, 0.002)])
    for seed in range(5):
        cfg = WrcConfig(B=200, q=0.1, seed=seed)
        assert wrc_pvalue(F, cfg).p_value == wrc_pvalue(top, cfg).p_value


def _market(seed=0, n=1500):
    p = random_walk(seed, n, vol=0.015)
    ps = PriceSeries(np.datetime64("2000-01-03") + np.arange(n), p)
    rets = compute_returns(ps)
    grid = generate_rule_grid()
    return rets, [positions_for(ps, r) for r in grid], grid


@pytest.mark.parametrize("short", [True, False])
def test_costs_never_help(short):
    rets, pos, grid = _market(1)
    prev_f, prev_v = None, None
    for c in (0.0, 0.003, 0.005, 0.01):
        cfg = WrcConfig(c=c, B=100, q=0.1, short_allowed=short, seed=9)
        F = performance_matrix(rets.relative_returns, pos, cfg)
        res = wrc_pvalue(F, cfg)
        if prev_f is not None:
            trades = np.array([np.any(np.diff(p.positions[199:]) != 0) for p in pos])
            assert np.all(res.f_bar[trades] < prev_f[trades])
            assert np.all(res.f_bar <= prev_f)
            assert res.V_bar <= prev_v
        prev_f, prev_v = res.f_bar, res.V_bar


def test_short_constraint_in_matrix():
    rets, pos, grid = _market(2)
    F_short = performance_matrix(rets.relative_returns, pos, WrcConfig(short_allowed=True))
    F_long = performance_matrix(rets.relative_returns, pos, WrcConfig(short_allowed=False))
    k = 0
    held = np.maximum(pos[k].positions, 0)
    np.testing.assert_allclose(
        F_long[k], brute_performance(rets.relative_returns, held.tolist(), 0.0, 201), atol=1e-15)
    assert not np.array_equal(F_short[k], F_long[k])
    assert F_long.shape == (48, 1500 - 201 + 1)


def test_config_validation():
    for bad in (dict(q=0.0), dict(q=1.5), dict(c=-0.1), dict(B=0), dict(R=1)):
        with pytest.raises(ConfigError):
            WrcConfig(**bad)
