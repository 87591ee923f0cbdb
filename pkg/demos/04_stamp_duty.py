"""How a tax on sales changes the optimal maker.

Each stamp-duty rate gets its own solved policy. Higher duty makes selling
dearer, so the maker trades less and gives up more of its expected profit.
"""
from __future__ import annotations

from mmqvi import BacktestParams, SchemeParams, baseline_model
from mmqvi.scenario import sweep_stamp_duty

scheme = SchemeParams(horizon=60.0, step=0.3, p_halfwidth=0.3)
bt = BacktestParams(horizon=60.0, step=0.3, n_paths=2000)
rates = (0.0, 0.0005, 0.001, 0.002)

res = sweep_stamp_duty(baseline_model(), rates, (0.005,), scheme, bt, threads=4)
print(f"{'rate':>7} {'mean P&L':>9} {'volume':>8} {'tax paid':>9} {'|Y| avg':>8}")
for r in res.rows:
    m = r.metrics
    print(f"{r.value:7.4f} {m.mean_profit:9.3f} {m.mean_total_volume:8.1f} {r.tax_mean:9.3f} {r.abs_inventory_mean:8.1f}")
