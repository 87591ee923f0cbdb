from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import small_model
from oracles import audit_path

from mmqvi.backtest import (
    METRIC_COLUMNS,
    BacktestParams,
    RngPlan,
    StrategySpec,
    compute_metrics,
    metrics_csv,
    run_monte_carlo,
    simulate_path,
    terminal_csv,
)
from mmqvi.errors import ArtifactMismatch
from mmqvi.model import (
    FeeSchedule,
    FillModel,
    MarketModel,
    MidQuoteModel,
    OrderBounds,
    SpreadModel,
    baseline_model,
)
from mmqvi.solver import SchemeParams, solve_backward

CONST = StrategySpec("constant")


def one_state(bid, ask, *, vol=0.0, tick=0.01, bounds=(100, 100, 100, -500, 500)):
    return MarketModel(FeeSchedule(tick, 0.0, 0.0), MidQuoteModel(14.0, 0.0, vol),
                       SpreadModel(1, tick, 0.0, [[1.0]]),
                       FillModel(np.array(bid, float).reshape(3, 1), np.array(ask, float).reshape(3, 1)),
                       OrderBounds(*bounds))


@pytest.fixture(scope="module")
def small_policy():
    m = small_model(3, p0=14.0, vol=0.01, rho=0.001)
    _, pol = solve_backward(m, SchemeParams(horizon=30.0, step=0.3, p_halfwidth=0.3, p_step=0.01))
    return m, pol


# -- metrics ----------------------------------------------------------------------------


def test_metrics_hand_example():
    m = compute_metrics(np.array([1.0, 2.0, 3.0]), np.array([10.0, 10.0, 10.0]), np.array([2.0, 2.0, 2.0]))
    assert (m.mean_profit, m.std_profit, m.information_ratio, m.skew_profit) == (2.0, 1.0, 2.0, 0.0)
    assert m.profit_per_trade == pytest.approx(0.2) and m.risk_per_trade == pytest.approx(0.1)
    assert m.market_over_total == pytest.approx(0.2)
    assert m.kurt_profit == pytest.approx(1.5)


def test_metrics_degenerate_sample():
    m = compute_metrics(np.full(5, 7.0), np.zeros(5), np.zeros(5))
    assert m.std_profit == 0.0 and m.information_ratio is None
    assert m.profit_per_trade is None and m.market_over_total is None


def test_gaussian_kurtosis_is_three():
    x = np.random.default_rng(0).standard_normal(10**6)
    m = compute_metrics(x, np.ones_like(x), np.zeros_like(x))
    assert abs(m.kurt_profit - 3.0) <= 3 * math.sqrt(24 / 10**6)
    assert abs(m.skew_profit) <= 3 * math.sqrt(6 / 10**6)


def test_metrics_csv_layout():
    m = compute_metrics(np.array([1.0, 2.0, 3.0]), np.ones(3), np.zeros(3))
    text = metrics_csv([m.row("optimal")])
    head, row = text.splitlines()
    assert head.split(",") == list(METRIC_COLUMNS)
    assert row.startswith("optimal,3,2.0,")
    assert terminal_csv({"X_T": np.array([1.5]), "Q_T": np.array([200.0]), "Qm_T": np.array([100.0]),
                         "meanAbsY": np.array([3.0])}).splitlines() == ["path,X_T,Q_T,Qm_T,meanAbsY", "0,1.5,200,100,3.0"]


# -- single paths ---------------------------------------------------------------------------


def test_inert_world():
    m = one_state([0, 0, 0], [0, 0, 0])
    res = run_monte_carlo(m, CONST, BacktestParams(horizon=30.0, n_paths=50, n_sample_paths=1))
    assert np.all(res.terminal["X_T"] == 0) and np.all(res.terminal["Q_T"] == 0)
    rec = res.samples[0]
    assert np.all(rec.price == 14.0) and np.all(rec.inventory == 0)


def test_single_forced_bid_fill():
    m = one_state([0, 1e6, 2e6], [0, 0, 0], tick=0.02)
    rec = simulate_path(m, CONST, BacktestParams(horizon=0.3, step=0.3, n_paths=1))
    assert rec.spread[0] == 1 and rec.bid_fill[0] and not rec.ask_fill[0]
    assert rec.cash[1] == pytest.approx(-1399.0, abs=1e-9)
    assert rec.inventory[1] == 100
    assert rec.liquidation == -100


def test_fill_count_is_binomial():
    lam, h, n, paths = 0.5, 0.3, 10, 10_000
    m = one_state([0.1, lam, 0.9], [0.9, 0.6, 0.3], bounds=(100, 100, 100, -2000, 2000))
    res = run_monte_carlo(m, CONST, BacktestParams(horizon=n * h, step=h, n_paths=paths, n_sample_paths=paths))
    counts = np.array([r.bid_fill.sum() for r in res.samples])
    p1 = 1 - math.exp(-lam * h)
    se = math.sqrt(n * p1 * (1 - p1) / paths)
    assert abs(counts.mean() - n * p1) <= 3 * se


def test_terminal_price_clt():
    m = baseline_model(**{"midquote.drift": 0.001})
    bt = BacktestParams(horizon=30.0, n_paths=4000, n_sample_paths=4000)
    res = run_monte_carlo(m, CONST, bt)
    pt = np.array([r.price[-1] for r in res.samples])
    assert abs(pt.mean() - (14.0 + 0.001 * 30)) <= 3 * 0.005 * math.sqrt(30) / math.sqrt(4000)


def test_constant_strategy_never_takes():
    res = run_monte_carlo(baseline_model(), CONST, BacktestParams(horizon=60.0, n_paths=200, n_sample_paths=200))
    for rec in res.samples:
        assert not rec.market_order.any() and not rec.kind.any()
        assert np.all(rec.bid_level == 1) and np.all(rec.ask_level == 1)
    # market volume is the forced liquidation only
    liq = np.array([abs(r.liquidation) for r in res.samples])
    np.testing.assert_array_equal(res.terminal["Qm_T"], liq)


def test_initial_spread_follows_stationary_law():
    m = baseline_model()
    res = run_monte_carlo(m, CONST, BacktestParams(horizon=0.3, n_paths=20_000, n_sample_paths=20_000))
    s0 = np.array([r.spread[0] for r in res.samples])
    pi = m.spread.stationary()
    for i in range(3):
        frac = np.mean(s0 == i + 1)
        assert abs(frac - pi[i]) <= 4 * math.sqrt(pi[i] * (1 - pi[i]) / len(s0))


# -- determinism ---------------------------------------------------------------------------------


def test_same_seed_same_metrics_any_threads(small_policy):
    m, pol = small_policy
    strat = StrategySpec("policy", pol)
    a = run_monte_carlo(m, strat, BacktestParams(horizon=30.0, n_paths=600, chunk_size=100))
    b = run_monte_carlo(m, strat, BacktestParams(horizon=30.0, n_paths=600, chunk_size=100, threads=4))
    c = run_monte_carlo(m, strat, BacktestParams(horizon=30.0, n_paths=600, chunk_size=37))
    assert a.metrics == b.metrics == c.metrics
    np.testing.assert_array_equal(a.terminal["X_T"], c.terminal["X_T"])
    d = run_monte_carlo(m, strat, BacktestParams(horizon=30.0, n_paths=600, chunk_size=100, seed=1))
    assert d.metrics != a.metrics


def test_path_does_not_depend_on_batch(small_policy):
    m, pol = small_policy
    strat = StrategySpec("policy", pol)
    bt = BacktestParams(horizon=30.0, n_paths=8, n_sample_paths=8, chunk_size=3)
    res = run_monte_carlo(m, strat, bt)
    alone = simulate_path(m, strat, bt, path=5)
    np.testing.assert_array_equal(alone.cash, res.samples[5].cash)
    assert alone.terminal_cash == res.terminal["X_T"][5]


def test_substreams_are_distinct():
    plan = RngPlan(42)
    a = plan.generator(0, 0).random(4)
    assert not np.array_equal(a, plan.generator(0, 1).random(4))
    assert not np.array_equal(a, plan.generator(1, 0).random(4))
    np.testing.assert_array_equal(a, RngPlan(42).generator(0, 0).random(4))


# -- artifacts and accounting --------------------------------------------------------------------


def test_policy_fingerprint_mismatch(small_policy):
    m, pol = small_policy
    other = m.with_(**{"midquote.vol": 0.02})
    with pytest.raises(ArtifactMismatch):
        run_monte_carlo(other, StrategySpec("policy", pol), BacktestParams(horizon=30.0, n_paths=5))
    res = run_monte_carlo(other, StrategySpec("policy", pol, allow_mismatch=True), BacktestParams(horizon=30.0, n_paths=5))
    assert res.metrics.n_paths == 5


def test_path_csv_layout(small_policy):
    m, pol = small_policy
    rec = simulate_path(m, StrategySpec("policy", pol), BacktestParams(horizon=30.0, n_paths=1))
    lines = rec.csv().splitlines()
    assert lines[0] == "t,P,S,X,Y,U,Q"
    assert len(lines) == 1 + 101


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), eps=st.sampled_from([0.0, 0.0003]), rho=st.sampled_from([0.0, 0.001]))
def test_accounting_identities(small_policy, seed, eps, rho):
    m, pol = small_policy
    m2 = m.with_(**{"fees.commission_rate": eps, "fees.stamp_rate": rho})
    for strat in (StrategySpec("policy", pol, allow_mismatch=True), CONST):
        res = run_monte_carlo(m2, strat, BacktestParams(horizon=30.0, n_paths=20, n_sample_paths=20, seed=seed))
        for rec in res.samples:
            assert audit_path(rec, m2) == []


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tax_matches_sell_notional(seed):
    m = baseline_model(**{"fees.stamp_rate": 0.001})
    res = run_monte_carlo(m, CONST, BacktestParams(horizon=30.0, n_paths=10, n_sample_paths=10, seed=seed))
    tick = m.tick
    for k, rec in enumerate(res.samples):
        notional = sum(int(rec.ask_size[j]) * (rec.price[j] + rec.spread[j] * tick / 2 + (int(rec.ask_level[j]) - 1) * tick)
                       for j in range(len(rec.kind)) if rec.ask_fill[j])
        if rec.liquidation < 0:
            notional += -rec.liquidation * (rec.price[-1] - rec.spread[-1] * tick / 2)
        assert res.terminal["tax"][k] == pytest.approx(0.001 * notional, rel=1e-12, abs=1e-12)
