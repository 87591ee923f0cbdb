"""What a trend does to the policy.

With a known upward drift the maker should lean long: quote more aggressively
on the bid and buy at market when flat. A downward drift mirrors that.
The table prints the t = 0 action across inventory levels for each drift.
"""
from __future__ import annotations

from mmqvi import BacktestParams, SchemeParams, baseline_model
from mmqvi.scenario import sweep_drift
from mmqvi.solver import describe_code

scheme = SchemeParams(horizon=60.0, step=0.3, p_halfwidth=0.3)
bt = BacktestParams(horizon=60.0, step=0.3, n_paths=1000)
res = sweep_drift(baseline_model(), (-0.001, 0.0, 0.001), scheme, bt)

for mu, codes in res.slices.items():
    print(f"drift {mu:+.3f}, tightest spread")
    for j, y in enumerate(res.slice_y):
        print(f"  y = {int(y):+5d}: {describe_code(int(codes[0, j]))}")
    row = res.row(mu).metrics
    print(f"  backtest mean P&L {row.mean_profit:.3f}, std {row.std_profit:.3f}")
