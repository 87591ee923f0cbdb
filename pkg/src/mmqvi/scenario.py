"""Parameter sweeps over volatility, stamp duty and drift.

Each cell is an independent (optionally re-solved) policy plus a backtest that
uses the same master seed, so neighbouring cells share random numbers and
monotonicity claims can be checked path-for-path.
"""
from __future__ import annotations

import csv
import io
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .backtest import BacktestParams, MetricsSummary, StrategySpec, run_monte_carlo
from .errors import ConfigError
from .model import MarketModel
from .solver import PolicyTensor, SchemeParams, solve_backward

AXES = ("volatility", "stamp_duty", "drift", "solver_sigma_mismatch")
DEFAULT_VALUES = {
    "volatility": (0.003, 0.004, 0.005, 0.006, 0.007),
    "solver_sigma_mismatch": (0.003, 0.004, 0.005, 0.006, 0.007),
    "stamp_duty": (0.0, 0.00025, 0.0005, 0.00075, 0.001, 0.0015, 0.002),
    "drift": (-0.001, 0.0, 0.001),
}


@dataclass(frozen=True)
class SweepSpec:
    axis: str
    values: tuple
    resolve_policy: bool = True
    n_paths: int = 10_000
    seed: int = 20190829
    sigmas: tuple | None = None  # stamp-duty grid only

    def __post_init__(self):
        if self.axis not in AXES:
            raise ConfigError(f"unknown sweep axis {self.axis!r}; expected one of {', '.join(AXES)}")
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "values", vals)
        if not vals:
            raise ConfigError("sweep needs at least one value")
        d = np.diff(vals)
        if len(vals) > 1 and not (np.all(d > 0) or np.all(d < 0)):
            raise ConfigError("sweep values must be strictly ordered")
        if self.axis == "stamp_duty" and any(not 0 <= v <= 0.002 for v in vals):
            raise ConfigError("stamp-duty values must lie in [0, 0.002]")
        if self.axis in ("volatility", "solver_sigma_mismatch") and any(v <= 0 for v in vals):
            raise ConfigError("volatility values must be > 0")
        if self.axis == "solver_sigma_mismatch" and self.resolve_policy:
            raise ConfigError("mismatch sweeps reuse one policy (resolve_policy must be false)")
        if self.sigmas is not None:
            object.__setattr__(self, "sigmas", tuple(float(s) for s in self.sigmas))


@dataclass
class SweepRow:
    value: float
    sigma: float
    metrics: MetricsSummary
    volume_std: float
    abs_inventory_mean: float
    abs_inventory_std: float
    tax_mean: float
    tax_std: float
    inventory_curve: np.ndarray | None = None
    inventory_curve_std: np.ndarray | None = None


@dataclass
class SweepResult:
    axis: str
    rows: list[SweepRow]
    slices: dict = field(default_factory=dict)  # value -> (m, n_y) action codes
    slice_y: np.ndarray | None = None

    def row(self, value: float, sigma: float | None = None) -> SweepRow:
        for r in self.rows:
            if r.value == value and (sigma is None or r.sigma == sigma):
                return r
        raise KeyError((value, sigma))

    def column(self, attr: str, sigma: float | None = None) -> np.ndarray:
        rows = [r for r in self.rows if sigma is None or r.sigma == sigma]
        if hasattr(rows[0].metrics, attr):
            return np.array([getattr(r.metrics, attr) for r in rows], dtype=float)
        return np.array([getattr(r, attr) for r in rows], dtype=float)


def _sd(x) -> float:
    return float(np.std(x, ddof=1)) if len(x) > 1 else float("nan")


def _cell(model: MarketModel, policy: PolicyTensor, value: float, bt: BacktestParams,
          allow_mismatch: bool = False) -> SweepRow:
    res = run_monte_carlo(model, StrategySpec("policy", policy, allow_mismatch=allow_mismatch), bt)
    term = res.terminal
    return SweepRow(
        value=value,
        sigma=model.midquote.vol,
        metrics=res.metrics,
        volume_std=_sd(term["Q_T"]),
        abs_inventory_mean=float(np.mean(term["meanAbsY"])),
        abs_inventory_std=_sd(term["meanAbsY"]),
        tax_mean=float(np.mean(term["tax"])),
        tax_std=_sd(term["tax"]),
        inventory_curve=res.abs_inventory_mean,
        inventory_curve_std=res.abs_inventory_std,
    )


def _run_cells(jobs, threads: int):
    if threads > 1 and len(jobs) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(lambda f: f(), jobs))
    return [f() for f in jobs]


def _bt(bt: BacktestParams, scheme: SchemeParams) -> BacktestParams:
    if bt.horizon != scheme.horizon:
        raise ConfigError("backtest horizon must equal the solver horizon")
    return bt


def sweep_volatility(base: MarketModel, values, scheme: SchemeParams, bt: BacktestParams,
                     threads: int = 1) -> SweepResult:
    """Re-solve and backtest at each volatility."""
    bt = _bt(bt, scheme)

    def job(v):
        def f():
            m = base.with_(**{"midquote.vol": v})
            return _cell(m, solve_backward(m, scheme)[1], v, bt)
        return f

    return SweepResult("volatility", _run_cells([job(v) for v in values], threads))


def sweep_sensitivity(base: MarketModel, policy: PolicyTensor, values, bt: BacktestParams,
                      threads: int = 1) -> SweepResult:
    """Backtest one fixed policy under each environment volatility."""

    def job(v):
        return lambda: _cell(base.with_(**{"midquote.vol": v}), policy, v, bt, allow_mismatch=True)

    return SweepResult("solver_sigma_mismatch", _run_cells([job(v) for v in values], threads))


def sweep_stamp_duty(base: MarketModel, rhos, sigmas, scheme: SchemeParams, bt: BacktestParams,
                     threads: int = 1) -> SweepResult:
    """Re-solve and backtest on the (stamp rate x volatility) grid."""
    bt = _bt(bt, scheme)

    def job(r, s):
        def f():
            m = base.with_(**{"fees.stamp_rate": r, "midquote.vol": s})
            return _cell(m, solve_backward(m, scheme)[1], r, bt)
        return f

    jobs = [job(r, s) for s in sigmas for r in rhos]
    return SweepResult("stamp_duty", _run_cells(jobs, threads))


def policy_slice(policy: PolicyTensor, t: int = 0) -> np.ndarray:
    """Action codes over (spread state, inventory) at time ``t`` and p = p0."""
    g = policy.grid
    return policy.codes(t)[:, :, g.p0_index].copy()


def sweep_drift(base: MarketModel, values, scheme: SchemeParams, bt: BacktestParams,
                threads: int = 1) -> SweepResult:
    """Re-solve and backtest at each drift; keeps the t = 0 action maps."""
    bt = _bt(bt, scheme)

    def job(mu):
        def f():
            m = base.with_(**{"midquote.drift": mu})
            pol = solve_backward(m, scheme)[1]
            return _cell(m, pol, mu, bt), policy_slice(pol), pol.grid.y_levels
        return f

    outs = _run_cells([job(mu) for mu in values], threads)
    res = SweepResult("drift", [o[0] for o in outs])
    res.slices = {float(mu): o[1] for mu, o in zip(values, outs)}
    res.slice_y = outs[0][2]
    return res


def run_sweep(spec: SweepSpec, base: MarketModel, scheme: SchemeParams, bt: BacktestParams,
              threads: int = 1, policy: PolicyTensor | None = None) -> SweepResult:
    bt = BacktestParams(bt.horizon, bt.step, spec.n_paths, spec.seed, 0, bt.threads, bt.chunk_size)
    if spec.axis == "volatility":
        return sweep_volatility(base, spec.values, scheme, bt, threads)
    if spec.axis == "solver_sigma_mismatch":
        pol = policy if policy is not None else solve_backward(base, scheme)[1]
        return sweep_sensitivity(base, pol, spec.values, bt, threads)
    if spec.axis == "stamp_duty":
        sig = spec.sigmas if spec.sigmas is not None else (base.midquote.vol,)
        return sweep_stamp_duty(base, spec.values, sig, scheme, bt, threads)
    return sweep_drift(base, spec.values, scheme, bt, threads)


# -- CSV emission -----------------------------------------------------------------


def _num(v):
    if v is None:
        return ""
    v = float(v)
    return "" if np.isnan(v) else repr(v)


def long_csv(result: SweepResult) -> str:
    """One line per (value, sigma, metric): ``axis,value,sigma,metric,mean,std``."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["axis", "value", "sigma", "metric", "mean", "std"])
    for r in result.rows:
        m = r.metrics
        lines = [
            ("profit", m.mean_profit, m.std_profit),
            ("total_volume", m.mean_total_volume, r.volume_std),
            ("market_volume", m.mean_market_volume, None),
            ("abs_inventory", r.abs_inventory_mean, r.abs_inventory_std),
            ("tax", r.tax_mean, r.tax_std),
            ("information_ratio", m.information_ratio, None),
            ("profit_per_trade", m.profit_per_trade, None),
            ("risk_per_trade", m.risk_per_trade, None),
            ("skew_profit", m.skew_profit, None),
            ("kurt_profit", m.kurt_profit, None),
            ("market_over_total", m.market_over_total, None),
        ]
        for name, mean, sd in lines:
            w.writerow([result.axis, repr(r.value), repr(r.sigma), name, _num(mean), _num(sd)])
    return buf.getvalue()


def changes_vs(result: SweepResult, reference: float) -> dict[float, dict[str, float]]:
    """Relative change of mean/std/IR against the row at ``reference``."""
    ref = result.row(reference).metrics
    out = {}
    for r in result.rows:
        m = r.metrics
        out[r.value] = {
            "mean_profit": m.mean_profit / ref.mean_profit - 1.0,
            "std_profit": m.std_profit / ref.std_profit - 1.0,
            "information_ratio": (m.information_ratio / ref.information_ratio - 1.0
                                  if m.information_ratio is not None and ref.information_ratio else float("nan")),
        }
    return out


def slice_csv(result: SweepResult) -> str:
    """``mu,spread_state,y,action_code`` rows for each stored t = 0 map."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["mu", "spread_state", "y", "action_code"])
    for mu, codes in result.slices.items():
        for i in range(codes.shape[0]):
            for j, y in enumerate(result.slice_y):
                w.writerow([repr(mu), i + 1, int(y), int(codes[i, j])])
    return buf.getvalue()


def curves_csv(result: SweepResult, step: float) -> str:
    """Mean and std of |Y_t| across paths per step, for each sweep row."""
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(["axis", "value", "sigma", "t", "mean_abs_y", "std_abs_y"])
    for r in result.rows:
        if r.inventory_curve is None:
            continue
        for k, (a, b) in enumerate(zip(r.inventory_curve, r.inventory_curve_std)):
            w.writerow([result.axis, repr(r.value), repr(r.sigma), repr((k + 1) * step), repr(float(a)), repr(float(b))])
    return buf.getvalue()
