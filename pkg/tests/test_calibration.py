from __future__ import annotations

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mmqvi.calibration import (
    FILL,
    QUOTE_OFF,
    QUOTE_ON,
    OwnQuoteLog,
    SnapshotSeries,
    calibrate,
    estimate_drift,
    estimate_fill_intensity,
    estimate_jump_intensity,
    estimate_transition_matrix,
    estimate_volatility,
    extract_spread_jumps,
    fill_counts,
    fit_parametric_fill,
    read_quote_log_csv,
    read_snapshots_csv,
    replay_spread,
    resample,
    simulate_market_data,
    write_quote_log_csv,
    write_snapshots_csv,
)
from mmqvi.errors import DataError, DomainError
from mmqvi.model import baseline_model, validate_model

D = 0.01


def series_from_spreads(times, spreads, mid=14.0):
    s = np.asarray(spreads, dtype=float)
    return SnapshotSeries(times, mid - s / 2, mid + s / 2)


def series_from_mid(times, mid, spread=0.01):
    mid = np.asarray(mid, dtype=float)
    return SnapshotSeries(times, mid - spread / 2, mid + spread / 2)


# -- input validation -------------------------------------------------------------------


def test_snapshot_validation():
    with pytest.raises(DataError, match="empty"):
        SnapshotSeries([], [], [])
    with pytest.raises(DataError, match="increasing"):
        SnapshotSeries([0, 0], [1, 1], [2, 2])
    with pytest.raises(DataError, match="exceed"):
        SnapshotSeries([0, 1], [1, 2], [2, 2])


def test_quote_log_validation():
    with pytest.raises(DataError, match="sorted"):
        OwnQuoteLog([1.0, 0.0], [0, 0], [1, 1], [1, 1], [QUOTE_ON, FILL])
    with pytest.raises(DataError, match="end_time"):
        OwnQuoteLog([0.0, 5.0], [0, 0], [1, 1], [1, 1], [QUOTE_ON, FILL], end_time=1.0)


# -- spread chain -------------------------------------------------------------------------


def test_jump_extraction_example():
    j = extract_spread_jumps(series_from_spreads([0, 1, 2, 3, 4], [D, D, 2 * D, 2 * D, D]), D)
    assert j.times.tolist() == [0, 2, 4]
    assert j.states.tolist() == [1, 2, 1]
    assert j.count == 2


def test_constant_spread_has_no_jumps():
    j = extract_spread_jumps(series_from_spreads([0, 1, 2], [2 * D] * 3), D)
    assert j.states.tolist() == [2] and j.count == 0


def test_off_tick_spread_is_data_error():
    with pytest.raises(DataError, match="multiple of tick"):
        extract_spread_jumps(series_from_spreads([0, 1], [D, 0.015]), D)


def test_wide_spreads_are_clipped_with_warning():
    with pytest.warns(UserWarning, match="clipped"):
        j = extract_spread_jumps(series_from_spreads([0, 1, 2], [D, 5 * D, D]), D, max_states=3)
    assert j.states.tolist() == [1, 3, 1]


def test_transition_examples():
    with pytest.warns(UserWarning, match="no departures"):
        r = estimate_transition_matrix([1, 2, 1, 2, 3], 3)
    assert r[0, 1] == 1.0 and r[1, 0] == 0.5 and r[1, 2] == 0.5
    np.testing.assert_array_equal(r[2], [0.5, 0.5, 0.0])
    alt = estimate_transition_matrix([1, 2] * 20, 2)
    np.testing.assert_array_equal(alt, [[0.0, 1.0], [1.0, 0.0]])
    with pytest.raises(DataError):
        estimate_transition_matrix([1])


@given(st.lists(st.integers(1, 4), min_size=2, max_size=60))
def test_transition_matrix_is_stochastic(states):
    s = [states[0]]
    for v in states[1:]:
        if v != s[-1]:
            s.append(v)
    if len(s) < 2:
        return
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        r = estimate_transition_matrix(s, 4)
    np.testing.assert_allclose(r.sum(axis=1), 1.0)
    assert np.all(np.diag(r) == 0) and np.all(r >= 0)


@given(st.lists(st.integers(1, 3), min_size=1, max_size=80))
def test_jump_replay_is_identity(states):
    times = np.arange(len(states)) * 0.5
    series = series_from_spreads(times, np.array(states) * D)
    j = extract_spread_jumps(series, D)
    np.testing.assert_array_equal(replay_spread(j, times), states)


def test_jump_intensity_examples():
    assert estimate_jump_intensity(300, 300.0) == 1.0
    assert estimate_jump_intensity(0, 300.0) == 0.0
    with pytest.raises(DomainError):
        estimate_jump_intensity(3, 0.0)


# -- mid-quote ------------------------------------------------------------------------------


def test_drift_examples():
    assert estimate_drift(series_from_mid([0, 150, 300], [14.0, 14.1, 14.3])) == pytest.approx(0.001)
    assert estimate_drift(series_from_mid([0, 1, 2], [14.0, 14.2, 14.0])) == 0.0


def test_volatility_examples():
    s = series_from_mid([0, 1, 2], [14.0, 14.01, 14.0])
    assert estimate_volatility(s, drift=0.0) == pytest.approx(0.01, rel=1e-9)
    straight = series_from_mid(np.arange(5) * 3.0, 14.0 + 0.002 * np.arange(5) * 3.0)
    assert estimate_volatility(straight) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(DataError, match="uniformly"):
        estimate_volatility(series_from_mid([0, 1, 3], [14.0, 14.01, 14.0]))


def test_resample_takes_last_observation():
    s = series_from_mid([0.0, 0.4, 1.1, 2.0, 2.2], [14.0, 14.1, 14.2, 14.3, 14.4])
    r = resample(s, 1.0)
    assert r.time.tolist() == [0.0, 1.0, 2.0]
    np.testing.assert_allclose(r.mid, [14.0, 14.1, 14.3])


def test_mid_recovery_from_simulation():
    truth = baseline_model(**{"midquote.drift": 0.001})
    data = simulate_market_data(truth, 1e4, seed=7)
    coarse = resample(data.snapshots, 3.0)
    mu = estimate_drift(coarse)
    sig = estimate_volatility(coarse, mu)
    assert abs(mu - 0.001) <= 3 * 0.005 / math.sqrt(1e4)
    assert abs(sig - 0.005) <= 0.02 * 0.005


# -- fills -------------------------------------------------------------------------------------


def test_fill_intensity_examples():
    log = OwnQuoteLog([0.0, 3.0, 6.0, 10.0], [0] * 4, [1] * 4, [1] * 4, [QUOTE_ON, FILL, FILL, QUOTE_OFF])
    assert estimate_fill_intensity(log, "bid", "best", 1) == pytest.approx(0.2)
    quiet = OwnQuoteLog([0.0, 10.0], [0, 0], [1, 1], [1, 1], [QUOTE_ON, QUOTE_OFF])
    assert estimate_fill_intensity(quiet, "bid", "best", 1) == 0.0
    with pytest.raises(DataError, match="no quoted time"):
        estimate_fill_intensity(quiet, "ask", "best", 1)


def test_fill_first_at_equal_timestamps():
    log = OwnQuoteLog([0.0, 10.0, 10.0], [1, 1, 1], [2, 2, 2], [2, 2, 2], [QUOTE_ON, QUOTE_OFF, FILL])
    fc = fill_counts(log, 3)
    assert fc.fills[1, 2, 1] == 1 and fc.occupancy[1, 2, 1] == 10.0


def test_fill_without_quote_is_data_error():
    log = OwnQuoteLog([0.0, 1.0, 2.0], [0, 0, 0], [1, 1, 1], [1, 1, 1], [QUOTE_ON, QUOTE_OFF, FILL])
    with pytest.raises(DataError, match="no quote is on"):
        fill_counts(log, 1)


def test_requote_relabels_cell():
    # re-issuing quote_on after a spread change moves the occupancy to the new cell
    log = OwnQuoteLog([0.0, 4.0, 10.0], [0, 0, 0], [1, 1, 1], [1, 2, 2], [QUOTE_ON, QUOTE_ON, QUOTE_OFF])
    fc = fill_counts(log, 2)
    assert fc.occupancy[0, 1, 0] == 4.0 and fc.occupancy[0, 1, 1] == 6.0


def test_fill_recovery_on_known_rate():
    rng = np.random.default_rng(11)
    horizon, lam = 1e4, 0.5
    n = rng.poisson(lam * horizon)
    ft = np.sort(rng.uniform(0, horizon, n))
    t = np.concatenate([[0.0], ft])
    k = len(t)
    log = OwnQuoteLog(t, np.zeros(k), np.ones(k), np.ones(k), np.r_[QUOTE_ON, np.full(n, FILL)], end_time=horizon)
    est = estimate_fill_intensity(log, "bid", "best", 1)
    assert abs(est - lam) <= 3 * math.sqrt(lam / horizon)


def test_parametric_fit_recovers_surface():
    truth = baseline_model()
    data = simulate_market_data(truth, 2e4, seed=3)
    a, k = fit_parametric_fill(fill_counts(data.quotes, 3))
    assert a == pytest.approx(0.4, rel=0.15) and k == pytest.approx(1.2, rel=0.15)


# -- end to end ----------------------------------------------------------------------------------


def test_calibrate_synthetic_round_trip():
    truth = baseline_model()
    data = simulate_market_data(truth, 1e4, seed=5)
    rep = calibrate(data.snapshots, data.quotes)
    m = rep.model
    assert validate_model(m) == []
    assert m.spread.jump_rate == pytest.approx(1.0, abs=4 * math.sqrt(1 / 1e4))
    np.testing.assert_allclose(m.spread.transition, truth.spread.transition, atol=0.05)
    np.testing.assert_allclose(m.fills.bid_intensity, truth.fills.bid_intensity, rtol=0.35)
    doc = rep.to_dict()
    assert {"counts", "standard_errors", "notes"} <= set(doc["report"])
    assert doc["report"]["counts"]["spread_jumps"] == rep.counts["spread_jumps"]


def test_calibrate_without_quote_log_keeps_base_fills():
    data = simulate_market_data(baseline_model(), 2000, seed=9)
    rep = calibrate(data.snapshots, None)
    np.testing.assert_array_equal(rep.model.fills.bid_intensity, baseline_model().fills.bid_intensity)


def test_non_monotone_cells_use_parametric_fallback():
    data = simulate_market_data(baseline_model(), 300, seed=2, requote_mean=20.0)
    rep = calibrate(data.snapshots, data.quotes)
    assert validate_model(rep.model) == []
    assert any("parametric" in n for n in rep.notes)


@settings(max_examples=5, deadline=None)
@given(st.integers(0, 10_000))
def test_simulated_data_is_well_formed(seed):
    data = simulate_market_data(baseline_model(), 200, seed=seed)
    j = extract_spread_jumps(data.snapshots, D, 3)
    assert set(np.unique(j.states)) <= {1, 2, 3}
    fc = fill_counts(data.quotes, 3)
    assert np.all(fc.occupancy.sum(axis=(1, 2)) <= 200 + 1e-9)


# -- CSV --------------------------------------------------------------------------------------


def test_csv_round_trip(tmp_path):
    data = simulate_market_data(baseline_model(), 50, seed=1, snapshot_dt=0.5)
    write_snapshots_csv(data.snapshots, tmp_path / "s.csv")
    back = read_snapshots_csv(tmp_path / "s.csv")
    np.testing.assert_array_equal(back.time, data.snapshots.time)
    np.testing.assert_array_equal(back.best_ask, data.snapshots.best_ask)
    write_quote_log_csv(data.quotes, tmp_path / "q.csv")
    q = read_quote_log_csv(tmp_path / "q.csv", end_time=50.0)
    np.testing.assert_array_equal(q.event, data.quotes.event)
    np.testing.assert_array_equal(q.level, data.quotes.level)
    header = (tmp_path / "q.csv").read_text().splitlines()[0:2]
    assert header[0] == "time_s,side,level,spread_state,event"
    assert header[1].split(",")[1] in ("bid", "ask")


def test_csv_errors(tmp_path):
    empty = tmp_path / "e.csv"
    empty.write_text("")
    with pytest.raises(DataError, match="empty"):
        read_snapshots_csv(empty)
    bad = tmp_path / "b.csv"
    bad.write_text("time,bid,ask\n0,1,2\n")
    with pytest.raises(DataError, match="header"):
        read_snapshots_csv(bad)
    with pytest.raises(DataError, match="does not exist"):
        read_snapshots_csv(tmp_path / "missing.csv")
    junk = tmp_path / "q.csv"
    junk.write_text("time_s,side,level,spread_state,event\n0,buy,best,1,quote_on\n")
    with pytest.raises(DataError, match="malformed"):
        read_quote_log_csv(junk)
