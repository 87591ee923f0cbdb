"""Monte Carlo backtester with a strategy in the loop.

Paths are simulated in vectorized chunks. Every path draws from its own
substreams keyed by ``(seed, path index, channel)``, so a path's trajectory
does not depend on chunking, thread count or which other paths are run.

Intra-step order: action lookup -> market order -> limit fills -> price step
-> spread step. At the horizon the remaining inventory is liquidated with one
market order.
"""
from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import ArtifactMismatch
from .model import MarketModel, market_cash, sell_tax
from .solver import TAKE, PolicyTensor

PRICE, SPREAD, BID_FILL, ASK_FILL = range(4)

METRIC_COLUMNS = (
    "strategy", "n_paths", "information_ratio", "profit_per_trade", "risk_per_trade",
    "mean_profit", "std_profit", "skew_profit", "kurt_profit",
    "mean_total_volume", "mean_market_volume", "market_over_total",
)


@dataclass(frozen=True)
class StrategySpec:
    kind: str = "constant"
    policy: PolicyTensor | None = None
    allow_mismatch: bool = False
    name: str | None = None

    def __post_init__(self):
        if self.kind not in ("policy", "constant"):
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.kind == "policy" and self.policy is None:
            raise ValueError("policy strategy needs a PolicyTensor")

    @property
    def label(self) -> str:
        return self.name or ("optimal" if self.kind == "policy" else "constant")


@dataclass(frozen=True)
class BacktestParams:
    horizon: float = 300.0
    step: float = 0.3
    n_paths: int = 10_000
    seed: int = 20190829
    n_sample_paths: int = 10
    threads: int = 1
    chunk_size: int = 1000

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))


@dataclass(frozen=True)
class RngPlan:
    """Counter-derived substreams: one generator per (path, channel)."""

    seed: int

    def generator(self, path: int, channel: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.seed, spawn_key=(int(path), int(channel))))

    def draws(self, paths, n_steps: int) -> dict[str, np.ndarray]:
        paths = list(paths)
        b = len(paths)
        z = np.empty((b, n_steps))
        su = np.empty((b, 2 * n_steps + 1))
        ub = np.empty((b, n_steps))
        ua = np.empty((b, n_steps))
        for r, k in enumerate(paths):
            z[r] = self.generator(k, PRICE).standard_normal(n_steps)
            su[r] = self.generator(k, SPREAD).random(2 * n_steps + 1)
            ub[r] = self.generator(k, BID_FILL).random(n_steps)
            ua[r] = self.generator(k, ASK_FILL).random(n_steps)
        return {"price": z, "spread0": su[:, 0], "jump": su[:, 1:n_steps + 1],
                "dest": su[:, n_steps + 1:], "bid": ub, "ask": ua}


@dataclass
class PathRecord:
    """One trajectory. State arrays have length n+1 (t_0 .. t_n, before the
    terminal liquidation); per-step arrays have length n."""

    t: np.ndarray
    price: np.ndarray
    spread: np.ndarray  # 1-based spread state
    cash: np.ndarray
    inventory: np.ndarray
    wealth: np.ndarray
    volume: np.ndarray
    market_volume: np.ndarray
    kind: np.ndarray
    bid_level: np.ndarray
    ask_level: np.ndarray
    bid_size: np.ndarray
    ask_size: np.ndarray
    market_order: np.ndarray
    bid_fill: np.ndarray
    ask_fill: np.ndarray
    terminal_cash: float = 0.0
    terminal_volume: float = 0.0
    terminal_market_volume: float = 0.0
    liquidation: int = 0

    def csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf)
        w.writerow(["t", "P", "S", "X", "Y", "U", "Q"])
        for k in range(len(self.t)):
            w.writerow([repr(float(self.t[k])), repr(float(self.price[k])), int(self.spread[k]),
                        repr(float(self.cash[k])), int(self.inventory[k]), repr(float(self.wealth[k])),
                        int(self.volume[k])])
        return buf.getvalue()


@dataclass
class MetricsSummary:
    n_paths: int
    mean_profit: float
    std_profit: float
    skew_profit: float | None
    kurt_profit: float | None
    information_ratio: float | None
    mean_total_volume: float
    mean_market_volume: float
    profit_per_trade: float | None
    risk_per_trade: float | None
    market_over_total: float | None

    def row(self, strategy: str) -> dict:
        d = {"strategy": strategy}
        for col in METRIC_COLUMNS[1:]:
            d[col] = getattr(self, col)
        return d


@dataclass
class MonteCarloResult:
    metrics: MetricsSummary
    terminal: dict[str, np.ndarray]
    samples: list[PathRecord] = field(default_factory=list)
    abs_inventory_mean: np.ndarray | None = None
    abs_inventory_std: np.ndarray | None = None


def _moments(x: np.ndarray):
    n = len(x)
    mean = float(np.mean(x))
    std = float(np.std(x, ddof=1)) if n >= 2 else float("nan")
    d = x - mean
    m2 = float(np.mean(d * d))
    if m2 > 0:
        skew = float(np.mean(d**3)) / m2**1.5
        kurt = float(np.mean(d**4)) / m2**2
    else:
        skew = kurt = None
    return mean, std, skew, kurt


def compute_metrics(x_t, q_t, qm_t) -> MetricsSummary:
    """Distributional statistics of terminal profit and traded volume.

    Standard deviation uses the n-1 denominator; skewness and (non-excess)
    kurtosis use central moment ratios. Ratios with a zero denominator are
    reported as ``None``.
    """
    x = np.asarray(x_t, dtype=float)
    q = np.asarray(q_t, dtype=float)
    qm = np.asarray(qm_t, dtype=float)
    mean, std, skew, kurt = _moments(x)
    mq = float(np.mean(q))
    mqm = float(np.mean(qm))
    ir = mean / std if std > 0 else None
    return MetricsSummary(
        n_paths=len(x),
        mean_profit=mean,
        std_profit=std,
        skew_profit=skew,
        kurt_profit=kurt,
        information_ratio=ir,
        mean_total_volume=mq,
        mean_market_volume=mqm,
        profit_per_trade=mean / mq if mq > 0 else None,
        risk_per_trade=std / mq if mq > 0 else None,
        market_over_total=mqm / mq if mq > 0 else None,
    )


def _check_policy(model: MarketModel, strategy: StrategySpec, params: BacktestParams):
    pol = strategy.policy
    if pol.model_fingerprint and pol.model_fingerprint != model.fingerprint() and not strategy.allow_mismatch:
        raise ArtifactMismatch(
            f"policy solved for model {pol.model_fingerprint[:12]}, backtest model is {model.fingerprint()[:12]}"
        )
    if pol.grid.n_states != model.n_states:
        raise ArtifactMismatch("policy and model disagree on the number of spread states")


class _Simulator:
    def __init__(self, model: MarketModel, strategy: StrategySpec, params: BacktestParams):
        self.model = model
        self.strategy = strategy
        self.params = params
        self.n = params.n_steps
        self.h = params.step
        b = model.bounds
        self.lot = b.lot
        self.ymin, self.ymax = b.y_min, b.y_max
        self.spreads = model.spread.spreads
        self.cum_trans = np.cumsum(model.spread.transition, axis=1)
        self.cum_stat = np.cumsum(model.spread.stationary())
        self.jump_p = -math.expm1(-model.spread.jump_rate * self.h)
        self.fill_pb = -np.expm1(-model.fills.bid_intensity * self.h)  # (3, m)
        self.fill_pa = -np.expm1(-model.fills.ask_intensity * self.h)
        if strategy.kind == "policy":
            _check_policy(model, strategy, params)
            pol = strategy.policy
            self.pol = pol
            g = pol.grid
            self.pol_n = g.n_steps
            if math.isclose(g.step, self.h, rel_tol=1e-12):
                self.t_index = np.minimum(np.arange(self.n), self.pol_n - 1)
            else:
                self.t_index = np.minimum(np.rint(np.arange(self.n) * self.h / g.step).astype(np.int64),
                                          self.pol_n - 1)
        self.const_lots = b.max_limit // b.lot

    def _actions(self, k, s, y, p):
        b_ = len(s)
        if self.strategy.kind == "constant":
            kind = np.zeros(b_, np.uint8)
            qb = np.ones(b_, np.int64)
            qa = np.ones(b_, np.int64)
            lb = np.full(b_, self.const_lots * self.lot, np.int64)
            la = lb.copy()
            e = np.zeros(b_, np.int64)
            return kind, qb, qa, lb, la, e
        pol, g = self.pol, self.pol.grid
        t = self.t_index[k]
        yi = np.clip(g.y_index(y), 0, g.n_y - 1)
        pi = g.p_index(p)
        key = (t, s, yi, pi)
        kind = pol.kind[key]
        lot = g.lot
        return (kind, pol.bid_level[key].astype(np.int64), pol.ask_level[key].astype(np.int64),
                pol.bid_lots[key].astype(np.int64) * lot, pol.ask_lots[key].astype(np.int64) * lot,
                pol.market_lots[key].astype(np.int64) * lot)

    def run(self, paths, record: int = 0):
        """Simulate the given path indices; full records for the first ``record`` of them."""
        model = self.model
        fees = model.fees
        mq = model.midquote
        n, h = self.n, self.h
        tick = fees.tick
        eps, rho = fees.commission_rate, fees.stamp_rate
        paths = list(paths)
        B = len(paths)
        dr = RngPlan(self.params.seed).draws(paths, n)

        s = np.searchsorted(self.cum_stat, dr["spread0"], side="right").clip(0, model.n_states - 1)
        p = np.full(B, float(mq.p0))
        y = np.zeros(B, np.int64)
        x = np.zeros(B)
        q = np.zeros(B, np.int64)
        qm = np.zeros(B, np.int64)
        tax = np.zeros(B)
        abs_y_sum = np.zeros(B)
        abs_curve = np.zeros(n)
        abs_curve_sq = np.zeros(n)
        drift_step = mq.drift * h
        vol_step = mq.vol * math.sqrt(h)

        R = min(record, B)
        if R:
            rec = {
                "price": np.empty((R, n + 1)), "spread": np.empty((R, n + 1), np.int64),
                "cash": np.empty((R, n + 1)), "inventory": np.empty((R, n + 1), np.int64),
                "volume": np.empty((R, n + 1), np.int64), "market_volume": np.empty((R, n + 1), np.int64),
                "kind": np.empty((R, n), np.uint8), "bid_level": np.empty((R, n), np.int64),
                "ask_level": np.empty((R, n), np.int64), "bid_size": np.empty((R, n), np.int64),
                "ask_size": np.empty((R, n), np.int64), "market_order": np.empty((R, n), np.int64),
                "bid_fill": np.empty((R, n), bool), "ask_fill": np.empty((R, n), bool),
            }

            def snap(k):
                rec["price"][:, k] = p[:R]
                rec["spread"][:, k] = s[:R] + 1
                rec["cash"][:, k] = x[:R]
                rec["inventory"][:, k] = y[:R]
                rec["volume"][:, k] = q[:R]
                rec["market_volume"][:, k] = qm[:R]

            snap(0)

        for k in range(n):
            sp = self.spreads[s]
            kind, qb, qa, lb, la, e = self._actions(k, s, y, p)
            take = kind == TAKE
            e = np.where(take, e, 0)
            # (2) market order
            if np.any(e):
                x -= market_cash(e, p, sp, fees)
                tax += sell_tax(e, p, sp, fees)
                y += e
                q += np.abs(e)
                qm += np.abs(e)
            # (3) limit fills, each checked against the pre-fill inventory
            lb = np.where(take, 0, lb)
            la = np.where(take, 0, la)
            y_pre = y.copy()
            bid_fill = (dr["bid"][:, k] < self.fill_pb[qb, s]) & (lb > 0) & (y_pre + lb <= self.ymax)
            ask_fill = (dr["ask"][:, k] < self.fill_pa[qa, s]) & (la > 0) & (y_pre - la >= self.ymin)
            bsz = np.where(bid_fill, lb, 0)
            asz = np.where(ask_fill, la, 0)
            raw_b = p - sp / 2.0 + (qb - 1) * tick
            raw_a = p + sp / 2.0 + (qa - 1) * tick
            x -= raw_b * (1.0 + eps) * bsz
            x += raw_a * (1.0 - eps - rho) * asz
            tax += rho * raw_a * asz
            y += bsz - asz
            q += bsz + asz
            ay = np.abs(y).astype(float)
            abs_y_sum += ay
            abs_curve[k] = ay.sum()
            abs_curve_sq[k] = (ay * ay).sum()
            if R:
                rec["kind"][:, k] = kind[:R]
                rec["bid_level"][:, k] = qb[:R]
                rec["ask_level"][:, k] = qa[:R]
                rec["bid_size"][:, k] = lb[:R]
                rec["ask_size"][:, k] = la[:R]
                rec["market_order"][:, k] = e[:R]
                rec["bid_fill"][:, k] = bid_fill[:R]
                rec["ask_fill"][:, k] = ask_fill[:R]
            # (4) price, (5) spread
            p = p + drift_step + vol_step * dr["price"][:, k]
            jump = dr["jump"][:, k] < self.jump_p
            if np.any(jump):
                dest = (dr["dest"][:, k][:, None] > self.cum_trans[s]).sum(axis=1)
                dest = np.minimum(dest, model.n_states - 1)
                s = np.where(jump, dest, s)
            if R:
                snap(k + 1)

        # forced liquidation at the horizon
        sp = self.spreads[s]
        liq = -y
        x_t = x - market_cash(liq, p, sp, fees)
        tax += sell_tax(liq, p, sp, fees)
        q_t = q + np.abs(liq)
        qm_t = qm + np.abs(liq)

        terminal = {
            "X_T": x_t, "Q_T": q_t.astype(float), "Qm_T": qm_t.astype(float),
            "meanAbsY": abs_y_sum / n, "tax": tax,
        }
        records = []
        if R:
            t = np.arange(n + 1) * h
            for r in range(R):
                wealth = rec["cash"][r] - market_cash(-rec["inventory"][r], rec["price"][r],
                                                      self.spreads[rec["spread"][r] - 1], fees)
                records.append(PathRecord(
                    t=t, price=rec["price"][r], spread=rec["spread"][r], cash=rec["cash"][r],
                    inventory=rec["inventory"][r], wealth=wealth, volume=rec["volume"][r],
                    market_volume=rec["market_volume"][r], kind=rec["kind"][r],
                    bid_level=rec["bid_level"][r], ask_level=rec["ask_level"][r],
                    bid_size=rec["bid_size"][r], ask_size=rec["ask_size"][r],
                    market_order=rec["market_order"][r], bid_fill=rec["bid_fill"][r],
                    ask_fill=rec["ask_fill"][r], terminal_cash=float(x_t[r]),
                    terminal_volume=float(q_t[r]), terminal_market_volume=float(qm_t[r]),
                    liquidation=int(liq[r]),
                ))
        return terminal, records, abs_curve, abs_curve_sq


def simulate_path(model: MarketModel, strategy: StrategySpec, params: BacktestParams, path: int = 0) -> PathRecord:
    """Full record of a single path (substream ``path`` of ``params.seed``)."""
    _, records, _, _ = _Simulator(model, strategy, params).run([path], record=1)
    return records[0]


def run_monte_carlo(model: MarketModel, strategy: StrategySpec, params: BacktestParams) -> MonteCarloResult:
    """Simulate ``params.n_paths`` paths and aggregate the summary metrics.

    Chunks have a fixed size independent of ``params.threads`` and are
    concatenated in path order, so results are bit-identical for any thread
    count.
    """
    if params.n_paths < 1:
        raise ValueError("n_paths must be >= 1")
    sim = _Simulator(model, strategy, params)
    chunks = [range(a, min(a + params.chunk_size, params.n_paths))
              for a in range(0, params.n_paths, params.chunk_size)]
    wants = [max(0, min(params.n_sample_paths - c.start, len(c))) for c in chunks]

    def job(arg):
        c, want = arg
        return sim.run(c, record=want)

    if params.threads > 1 and len(chunks) > 1:
        with ThreadPoolExecutor(params.threads) as pool:
            outs = list(pool.map(job, zip(chunks, wants)))
    else:
        outs = [job(a) for a in zip(chunks, wants)]

    terminal = {k: np.concatenate([o[0][k] for o in outs]) for k in outs[0][0]}
    samples = [r for o in outs for r in o[1]]
    tot = np.zeros(sim.n)
    tot_sq = np.zeros(sim.n)
    for o in outs:
        tot += o[2]
        tot_sq += o[3]
    N = params.n_paths
    mean_curve = tot / N
    var_curve = np.maximum(tot_sq / N - mean_curve**2, 0.0) * (N / max(N - 1, 1))
    metrics = compute_metrics(terminal["X_T"], terminal["Q_T"], terminal["Qm_T"])
    return MonteCarloResult(metrics, terminal, samples, mean_curve, np.sqrt(var_curve))


# -- CSV emission ---------------------------------------------------------------


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return v


def metrics_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(METRIC_COLUMNS)
    for r in rows:
        w.writerow([_fmt(r[c]) for c in METRIC_COLUMNS])
    return buf.getvalue()


def terminal_csv(terminal: dict[str, np.ndarray]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["path", "X_T", "Q_T", "Qm_T", "meanAbsY"])
    for k in range(len(terminal["X_T"])):
        w.writerow([k, repr(float(terminal["X_T"][k])), int(terminal["Q_T"][k]),
                    int(terminal["Qm_T"][k]), repr(float(terminal["meanAbsY"][k]))])
    return buf.getvalue()
