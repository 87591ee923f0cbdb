"""Parameter estimation from flattened market data and the maker's own
quote/fill log.

Two inputs are supported:

* a snapshot series of best bid/ask quotes, from which the spread chain
  (jump times, embedded transition matrix, jump intensity) and the mid-quote
  diffusion (drift, volatility) are estimated;
* a log of the maker's own quotes and fills, from which fill intensities per
  (quote level, spread state) cell are estimated as fills over occupancy time.

A synthetic generator produces both inputs from a known ``MarketModel``; it
backs the recovery tests.
"""
from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError, DomainError
from .model import (
    LEVELS,
    FillModel,
    MarketModel,
    MidQuoteModel,
    SpreadModel,
    baseline_model,
    parametric_fill_model,
    validate_model,
)

SIDES = ("bid", "ask")
EVENTS = ("quote_on", "quote_off", "fill")
QUOTE_ON, QUOTE_OFF, FILL = range(3)


# -- input series --------------------------------------------------------------


@dataclass(frozen=True)
class SnapshotSeries:
    """Best bid/ask observations at strictly increasing times (seconds)."""

    time: np.ndarray
    best_bid: np.ndarray
    best_ask: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.time, dtype=float)
        b = np.asarray(self.best_bid, dtype=float)
        a = np.asarray(self.best_ask, dtype=float)
        if t.ndim != 1 or t.shape != b.shape or t.shape != a.shape:
            raise DataError("snapshot columns must be 1-D and of equal length")
        if len(t) == 0:
            raise DataError("snapshot series is empty")
        if not (np.all(np.isfinite(t)) and np.all(np.isfinite(b)) and np.all(np.isfinite(a))):
            raise DataError("snapshot series contains non-finite values")
        if np.any(np.diff(t) <= 0):
            raise DataError("snapshot times must be strictly increasing")
        if np.any(a <= b):
            raise DataError("best_ask must exceed best_bid in every snapshot")
        for name, arr in (("time", t), ("best_bid", b), ("best_ask", a)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    def __len__(self) -> int:
        return len(self.time)

    @property
    def horizon(self) -> float:
        return float(self.time[-1] - self.time[0])

    @property
    def mid(self) -> np.ndarray:
        return (self.best_bid + self.best_ask) / 2.0

    @property
    def spread(self) -> np.ndarray:
        return self.best_ask - self.best_bid


@dataclass(frozen=True)
class OwnQuoteLog:
    """Columnar quote/fill log. ``side`` holds 0 = bid, 1 = ask; ``level``
    holds level codes 0/1/2 (minus/best/plus); ``spread_state`` is 1-based;
    ``event`` holds 0 = quote_on, 1 = quote_off, 2 = fill."""

    time: np.ndarray
    side: np.ndarray
    level: np.ndarray
    spread_state: np.ndarray
    event: np.ndarray
    end_time: float | None = None

    def __post_init__(self):
        cols = {
            "time": np.asarray(self.time, dtype=float),
            "side": np.asarray(self.side, dtype=np.int8),
            "level": np.asarray(self.level, dtype=np.int8),
            "spread_state": np.asarray(self.spread_state, dtype=np.int64),
            "event": np.asarray(self.event, dtype=np.int8),
        }
        n = len(cols["time"])
        if any(c.shape != (n,) for c in cols.values()):
            raise DataError("quote log columns must be 1-D and of equal length")
        t = cols["time"]
        if n and np.any(np.diff(t) < 0):
            raise DataError("quote log must be sorted by time")
        if np.any((cols["side"] < 0) | (cols["side"] > 1)):
            raise DataError("quote log side must be bid or ask")
        if np.any((cols["level"] < 0) | (cols["level"] > 2)):
            raise DataError("quote log level must be minus, best or plus")
        if np.any((cols["event"] < 0) | (cols["event"] > 2)):
            raise DataError("unknown quote log event")
        if np.any(cols["spread_state"] < 1):
            raise DataError("spread_state must be >= 1")
        for name, arr in cols.items():
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.end_time is None:
            object.__setattr__(self, "end_time", float(t[-1]) if n else 0.0)
        elif n and self.end_time < t[-1]:
            raise DataError("end_time precedes the last log event")

    def __len__(self) -> int:
        return len(self.time)


# -- spread chain ----------------------------------------------------------------


@dataclass(frozen=True)
class SpreadJumps:
    times: np.ndarray  # theta_0 = first observation time, then jump times
    states: np.ndarray  # 1-based spread state at each theta_n
    count: int  # number of jumps in (0, T_p]


def spread_states(series: SnapshotSeries, tick: float, max_states: int | None = None) -> np.ndarray:
    """1-based spread state per snapshot; widths beyond ``max_states`` ticks
    are clipped with a warning."""
    ratio = series.spread / tick
    k = np.rint(ratio)
    if np.any(np.abs(ratio - k) > 1e-6) or np.any(k < 1):
        bad = int(np.flatnonzero((np.abs(ratio - k) > 1e-6) | (k < 1))[0])
        raise DataError(f"spread {series.spread[bad]!r} at t={series.time[bad]} is not a positive multiple of tick {tick}")
    k = k.astype(np.int64)
    if max_states is not None and np.any(k > max_states):
        n = int(np.sum(k > max_states))
        warnings.warn(f"{n} snapshots with spread wider than {max_states} ticks clipped", stacklevel=2)
        k = np.minimum(k, max_states)
    return k


def extract_spread_jumps(series: SnapshotSeries, tick: float = 0.01, max_states: int | None = None) -> SpreadJumps:
    """Jump times of the observed spread and the embedded chain's states."""
    k = spread_states(series, tick, max_states)
    change = np.flatnonzero(k[1:] != k[:-1]) + 1
    idx = np.concatenate([[0], change])
    return SpreadJumps(series.time[idx].copy(), k[idx].copy(), int(len(change)))


def replay_spread(jumps: SpreadJumps, times: np.ndarray) -> np.ndarray:
    """Piecewise-constant spread state at ``times`` implied by the jumps."""
    pos = np.searchsorted(jumps.times, np.asarray(times, dtype=float), side="right") - 1
    return jumps.states[np.clip(pos, 0, None)]


def transition_counts(states, n_states: int | None = None) -> np.ndarray:
    s = np.asarray(states, dtype=np.int64)
    if len(s) < 2:
        raise DataError("need at least two observed spread states")
    m = int(n_states if n_states is not None else s.max())
    counts = np.zeros((m, m), dtype=np.int64)
    np.add.at(counts, (s[:-1] - 1, s[1:] - 1), 1)
    return counts


def estimate_transition_matrix(states, n_states: int | None = None) -> np.ndarray:
    """Row-normalized transition counts of the embedded chain.

    Rows without departures are filled uniformly over the other states, with a
    warning.
    """
    counts = transition_counts(states, n_states).astype(float)
    m = counts.shape[0]
    dep = counts.sum(axis=1)
    out = np.zeros_like(counts)
    for i in range(m):
        if dep[i] > 0:
            out[i] = counts[i] / dep[i]
        elif m == 1:
            out[i, i] = 1.0
        else:
            warnings.warn(f"spread state {i + 1} has no departures; row filled uniformly", stacklevel=2)
            out[i] = 1.0 / (m - 1)
            out[i, i] = 0.0
    return out


def estimate_jump_intensity(n_jumps: int, horizon: float) -> float:
    if not horizon > 0:
        raise DomainError(f"observation horizon must be > 0 (got {horizon})")
    return n_jumps / horizon


# -- mid-quote ---------------------------------------------------------------------


def estimate_drift(series: SnapshotSeries) -> float:
    if len(series) < 2:
        raise DataError("drift needs at least two observations")
    mid = series.mid
    return float((mid[-1] - mid[0]) / series.horizon)


def estimate_volatility(series: SnapshotSeries, drift: float | None = None) -> float:
    """Root of the sum of squared de-meaned increments over the horizon.

    The drift correction is scaled by the sampling interval, so the estimate
    does not depend on the time unit of ``dt``.
    """
    if len(series) < 3:
        raise DataError("volatility needs at least three observations")
    dt = np.diff(series.time)
    if np.any(np.abs(dt - dt[0]) > 1e-6 * max(dt[0], 1e-12)):
        raise DataError("volatility needs uniformly spaced observations; resample first")
    mu = estimate_drift(series) if drift is None else drift
    inc = np.diff(series.mid) - mu * dt[0]
    return float(math.sqrt(np.sum(inc * inc) / series.horizon))


def resample(series: SnapshotSeries, dt: float) -> SnapshotSeries:
    """Last observation at or before each point of the grid ``t0 + k dt``."""
    if not dt > 0:
        raise DomainError("resample interval must be > 0")
    t0 = series.time[0]
    n = int(math.floor(series.horizon / dt + 1e-9))
    grid = t0 + dt * np.arange(n + 1)
    pos = np.searchsorted(series.time, grid + 1e-9 * dt, side="right") - 1
    return SnapshotSeries(grid, series.best_bid[pos], series.best_ask[pos])


# -- fill intensities ----------------------------------------------------------------


@dataclass(frozen=True)
class FillCounts:
    """Per-side fill counts and occupancy seconds, indexed [side, level, spread-1]."""

    fills: np.ndarray
    occupancy: np.ndarray


def fill_counts(log: OwnQuoteLog, n_states: int) -> FillCounts:
    """Count fills and integrate quoted time per (side, level, spread state).

    A quote's cell is set by its latest ``quote_on`` (re-issuing ``quote_on``
    while on re-labels the cell, e.g. after a spread change). At equal
    timestamps fills are processed before quote updates.
    """
    fills = np.zeros((2, 3, n_states))
    occ = np.zeros((2, 3, n_states))
    for side in (0, 1):
        sel = np.flatnonzero(log.side == side)
        if len(sel) == 0:
            continue
        t = log.time[sel]
        ev = log.event[sel]
        lv = log.level[sel].astype(np.int64)
        ss = log.spread_state[sel]
        order = np.lexsort((np.where(ev == FILL, 0, 1), t))
        t, ev, lv, ss = t[order], ev[order], lv[order], ss[order]
        if np.any(ss > n_states):
            raise DataError(f"quote log spread_state exceeds {n_states}")
        is_quote = ev != FILL
        last = np.where(is_quote, np.arange(len(t)), -1)
        last = np.maximum.accumulate(last)
        known = last >= 0
        on = np.zeros(len(t), dtype=bool)
        on[known] = ev[last[known]] == QUOTE_ON
        cur_lv = np.where(known, lv[np.maximum(last, 0)], 0)
        cur_ss = np.where(known, ss[np.maximum(last, 0)], 1)
        fill_ev = ev == FILL
        if np.any(fill_ev & ~on):
            k = int(np.flatnonzero(fill_ev & ~on)[0])
            raise DataError(f"fill at t={t[k]} on the {SIDES[side]} side while no quote is on")
        np.add.at(fills[side], (cur_lv[fill_ev], cur_ss[fill_ev] - 1), 1.0)
        dur = np.diff(np.concatenate([t, [log.end_time]]))
        np.add.at(occ[side], (cur_lv[on], cur_ss[on] - 1), dur[on])
    return FillCounts(fills, occ)


def estimate_fill_intensity(log: OwnQuoteLog, side: str, level: str, spread_state: int,
                            n_states: int | None = None) -> float:
    """Fills per second of quoted time in one (side, level, spread state) cell."""
    m = n_states if n_states is not None else int(max(spread_state, log.spread_state.max(initial=1)))
    fc = fill_counts(log, m)
    s, q = SIDES.index(side), LEVELS.index(level)
    occ = fc.occupancy[s, q, spread_state - 1]
    if not occ > 0:
        raise DataError(f"no quoted time in cell ({side}, {level}, {spread_state}); supply it or use the fallback")
    return float(fc.fills[s, q, spread_state - 1] / occ)


def quote_distance(n_states: int) -> np.ndarray:
    """Distance from the mid in ticks, indexed [side, level, spread-1]."""
    half = np.arange(1, n_states + 1) / 2.0
    offs = np.array([-1.0, 0.0, 1.0])[:, None]
    return np.stack([half[None, :] - offs, half[None, :] + offs])


def fit_parametric_fill(fc: FillCounts) -> tuple[float, float]:
    """Least squares of log-intensity on quote distance over cells with fills."""
    m = fc.fills.shape[2]
    d = quote_distance(m)
    ok = (fc.occupancy > 0) & (fc.fills > 0)
    if np.count_nonzero(ok) < 2 or np.ptp(d[ok]) == 0:
        raise DataError("too few observed fill cells for the parametric fallback")
    lam = fc.fills[ok] / fc.occupancy[ok]
    slope, intercept = np.polyfit(d[ok], np.log(lam), 1)
    return float(math.exp(intercept)), float(-slope)


# -- end-to-end ------------------------------------------------------------------------


@dataclass
class CalibrationReport:
    model: MarketModel
    counts: dict = field(default_factory=dict)
    standard_errors: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)

    def to_dict(self) -> dict:
        doc = self.model.to_dict()
        doc["report"] = {"counts": self.counts, "standard_errors": self.standard_errors, "notes": self.notes}
        return doc


def calibrate(series: SnapshotSeries, log: OwnQuoteLog | None = None, *, tick: float = 0.01,
              n_states: int = 3, dt: float = 3.0, base: MarketModel | None = None) -> CalibrationReport:
    """Fit a ``MarketModel``; parts not covered by the data come from ``base``."""
    base = base if base is not None else baseline_model()
    notes: list[str] = []
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        jumps = extract_spread_jumps(series, tick, n_states)
        trans = estimate_transition_matrix(jumps.states, n_states)
    notes += [str(w.message) for w in caught]
    horizon = series.horizon
    lam = estimate_jump_intensity(jumps.count, horizon)
    coarse = resample(series, dt) if dt and dt < horizon else series
    mu = estimate_drift(coarse)
    sigma = estimate_volatility(coarse, mu)
    dep = transition_counts(jumps.states, n_states).sum(axis=1)
    counts = {
        "snapshots": len(series),
        "horizon_s": horizon,
        "spread_jumps": jumps.count,
        "departures": dep.tolist(),
        "mid_increments": len(coarse) - 1,
    }
    se = {
        "jump_rate": math.sqrt(jumps.count) / horizon,
        "drift": sigma / math.sqrt(horizon),
        "vol": sigma / math.sqrt(2 * (len(coarse) - 1)),
        "transition": [[math.sqrt(trans[i, j] * (1 - trans[i, j]) / dep[i]) if dep[i] else None
                        for j in range(n_states)] for i in range(n_states)],
    }

    fills = base.fills
    if log is not None and len(log):
        fc = fill_counts(log, n_states)
        with np.errstate(invalid="ignore", divide="ignore"):
            lam_hat = np.where(fc.occupancy > 0, fc.fills / fc.occupancy, np.nan)
        missing = ~np.isfinite(lam_hat)
        table = lam_hat.copy()
        if np.any(missing):
            a, k = fit_parametric_fill(fc)
            par = parametric_fill_model(a, k, n_states)
            fallback = np.stack([par.bid_intensity, par.ask_intensity])
            table[missing] = fallback[missing]
            notes.append(f"{int(missing.sum())} unobserved fill cells from parametric fit A={a:.6g}, k={k:.6g}")
        candidate = FillModel(table[0], table[1])
        if _monotone_violation(table):
            a, k = fit_parametric_fill(fc)
            candidate = parametric_fill_model(a, k, n_states)
            notes.append(f"observed fill cells not monotone in quote level; parametric fit A={a:.6g}, k={k:.6g} used")
        fills = candidate
        counts["fills"] = fc.fills.tolist()
        counts["occupancy_s"] = fc.occupancy.tolist()
        with np.errstate(invalid="ignore", divide="ignore"):
            se["fill_intensity"] = np.where(fc.occupancy > 0, np.sqrt(fc.fills) / fc.occupancy, np.nan).tolist()

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        spread = SpreadModel(n_states, tick, lam, trans)
    model = MarketModel(
        fees=replace(base.fees, tick=tick),
        midquote=MidQuoteModel(float(series.mid[0]), mu, sigma),
        spread=spread,
        fills=fills,
        bounds=base.bounds,
    )
    problems = validate_model(model)
    if problems:
        raise DataError("calibrated model is invalid: " + "; ".join(problems))
    return CalibrationReport(model, counts, se, notes)


def _monotone_violation(table: np.ndarray) -> bool:
    bid, ask = table[0], table[1]
    return bool(np.any(~((bid[0] < bid[1]) & (bid[1] < bid[2]))) or np.any(~((ask[2] < ask[1]) & (ask[1] < ask[0]))))


# -- CSV IO ---------------------------------------------------------------------------


def _read_rows(path, header: tuple[str, ...]) -> list[list[str]]:
    p = Path(path)
    if not p.exists():
        raise DataError(f"{p} does not exist")
    with p.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{p} is empty")
    if tuple(c.strip() for c in rows[0]) != header:
        raise DataError(f"{p}: expected header {','.join(header)}")
    body = [r for r in rows[1:] if r]
    if not body:
        raise DataError(f"{p} has a header but no data rows")
    return body


def read_snapshots_csv(path) -> SnapshotSeries:
    rows = _read_rows(path, ("time_s", "best_bid", "best_ask"))
    try:
        arr = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from None
    if arr.shape[1] != 3:
        raise DataError(f"{path}: every row needs three fields")
    return SnapshotSeries(arr[:, 0], arr[:, 1], arr[:, 2])


def write_snapshots_csv(series: SnapshotSeries, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "best_bid", "best_ask"])
        for t, b, a in zip(series.time, series.best_bid, series.best_ask):
            w.writerow([repr(float(t)), repr(float(b)), repr(float(a))])


def read_quote_log_csv(path, end_time: float | None = None) -> OwnQuoteLog:
    rows = _read_rows(path, ("time_s", "side", "level", "spread_state", "event"))
    try:
        t = [float(r[0]) for r in rows]
        side = [SIDES.index(r[1].strip()) for r in rows]
        level = [LEVELS.index(r[2].strip()) for r in rows]
        ss = [int(r[3]) for r in rows]
        ev = [EVENTS.index(r[4].strip()) for r in rows]
    except (ValueError, IndexError) as exc:
        raise DataError(f"{path}: malformed row ({exc})") from None
    return OwnQuoteLog(t, side, level, ss, ev, end_time)


def write_quote_log_csv(log: OwnQuoteLog, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(["time_s", "side", "level", "spread_state", "event"])
        for k in range(len(log)):
            w.writerow([repr(float(log.time[k])), SIDES[log.side[k]], LEVELS[log.level[k]],
                        int(log.spread_state[k]), EVENTS[log.event[k]]])


# -- synthetic data ----------------------------------------------------------------------


@dataclass(frozen=True)
class SyntheticData:
    snapshots: SnapshotSeries
    quotes: OwnQuoteLog
    spread_times: np.ndarray  # exact jump times (theta_0 = 0 included)
    spread_path: np.ndarray  # 1-based state after each jump


def simulate_market_data(model: MarketModel, horizon: float, seed: int, *, snapshot_dt: float = 0.01,
                         requote_mean: float = 2.0, off_prob: float = 0.1) -> SyntheticData:
    """Snapshots and an own-quote log drawn from ``model``.

    The spread chain is simulated in continuous time and observed at the
    snapshot cadence; the mid is an exact Brownian motion on the snapshot
    grid. Each side of the synthetic maker re-draws its quote level uniformly
    at exponential intervals (mean ``requote_mean`` seconds), staying off the
    book with probability ``off_prob``; fills arrive as Poisson events while
    quoted.
    """
    rng = np.random.default_rng(seed)
    m = model.n_states
    sp = model.spread
    lam = sp.jump_rate

    # spread chain
    pi0 = sp.stationary()
    s0 = int(rng.choice(m, p=pi0)) + 1
    n_guess = int(lam * horizon + 10 * math.sqrt(lam * horizon + 1) + 10)
    gaps = rng.exponential(1.0 / lam, n_guess) if lam > 0 else np.array([np.inf])
    jt = np.cumsum(gaps)
    while lam > 0 and jt[-1] < horizon:
        jt = np.concatenate([jt, jt[-1] + np.cumsum(rng.exponential(1.0 / lam, n_guess))])
    jt = jt[jt <= horizon]
    path = np.empty(len(jt) + 1, dtype=np.int64)
    path[0] = s0
    cum = np.cumsum(sp.transition, axis=1)
    u = rng.random(len(jt))
    for n in range(len(jt)):
        path[n + 1] = min(int(np.searchsorted(cum[path[n] - 1], u[n], side="right")), m - 1) + 1
    theta = np.concatenate([[0.0], jt])

    # snapshots
    n_snap = int(round(horizon / snapshot_dt))
    ts = snapshot_dt * np.arange(n_snap + 1)
    mq = model.midquote
    z = rng.standard_normal(n_snap)
    mid = mq.p0 + np.concatenate([[0.0], np.cumsum(mq.drift * snapshot_dt + mq.vol * math.sqrt(snapshot_dt) * z)])
    state = path[np.searchsorted(theta, ts, side="right") - 1]
    half = state * sp.tick / 2.0
    snaps = SnapshotSeries(ts, mid - half, mid + half)

    # own quotes
    tables = (model.fills.bid_intensity, model.fills.ask_intensity)
    ev_t, ev_side, ev_lv, ev_ss, ev_kind = [], [], [], [], []
    for side in (0, 1):
        rq = np.cumsum(rng.exponential(requote_mean, int(horizon / requote_mean * 1.5) + 20))
        while rq[-1] < horizon:
            rq = np.concatenate([rq, rq[-1] + np.cumsum(rng.exponential(requote_mean, 100))])
        rq = np.concatenate([[0.0], rq[rq < horizon]])
        levels = rng.integers(0, 3, len(rq))
        is_on = rng.random(len(rq)) >= off_prob
        # segment boundaries: requotes and spread jumps
        bounds = np.union1d(rq, theta)
        seg_end = np.concatenate([bounds[1:], [horizon]])
        qi = np.searchsorted(rq, bounds, side="right") - 1
        si = np.searchsorted(theta, bounds, side="right") - 1
        seg_on = is_on[qi]
        seg_lv = levels[qi]
        seg_ss = path[si]
        # quote events: at each boundary where the on-state or cell changes
        prev_on = np.concatenate([[False], seg_on[:-1]])
        prev_cell = np.concatenate([[-1], (seg_lv * 100 + seg_ss)[:-1]])
        cell = seg_lv * 100 + seg_ss
        emit_on = seg_on & (~prev_on | (cell != prev_cell))
        emit_off = ~seg_on & prev_on
        for mask, kind in ((emit_on, QUOTE_ON), (emit_off, QUOTE_OFF)):
            idx = np.flatnonzero(mask)
            ev_t.append(bounds[idx])
            ev_side.append(np.full(len(idx), side))
            ev_lv.append(seg_lv[idx])
            ev_ss.append(seg_ss[idx])
            ev_kind.append(np.full(len(idx), kind))
        # fills
        rate = np.where(seg_on, tables[side][seg_lv, seg_ss - 1], 0.0)
        dur = seg_end - bounds
        nf = rng.poisson(rate * dur)
        seg_of_fill = np.repeat(np.arange(len(bounds)), nf)
        ft = bounds[seg_of_fill] + rng.random(len(seg_of_fill)) * dur[seg_of_fill]
        # keep fills strictly inside their segment so the cell attribution is unambiguous
        ft = np.minimum(np.maximum(ft, np.nextafter(bounds[seg_of_fill], np.inf)),
                        np.nextafter(seg_end[seg_of_fill], -np.inf))
        ev_t.append(ft)
        ev_side.append(np.full(len(ft), side))
        ev_lv.append(seg_lv[seg_of_fill])
        ev_ss.append(seg_ss[seg_of_fill])
        ev_kind.append(np.full(len(ft), FILL))
    t = np.concatenate(ev_t)
    order = np.argsort(t, kind="stable")
    log = OwnQuoteLog(t[order], np.concatenate(ev_side)[order], np.concatenate(ev_lv)[order],
                      np.concatenate(ev_ss)[order], np.concatenate(ev_kind)[order], end_time=float(horizon))
    return SyntheticData(snaps, log, theta, path)
