"""Solve for the optimal quoting policy and race it against a naive quoter.

The naive strategy always sits at the best bid and ask with one lot and only
flattens at the close. The optimal one chooses levels, sizes and market
orders from the solved policy. A shortened horizon keeps this under a minute.
"""
from __future__ import annotations

import time

from mmqvi import BacktestParams, SchemeParams, StrategySpec, baseline_model, run_monte_carlo, solve_backward
from mmqvi.solver import describe_code

model = baseline_model()
scheme = SchemeParams(horizon=60.0, step=0.3, p_halfwidth=0.3)

t0 = time.perf_counter()
_, policy = solve_backward(model, scheme)
print(f"solved grid {policy.grid.shape} in {time.perf_counter() - t0:.1f} s")

g = policy.grid
print("actions at t = 0, p = p0, tightest spread:")
for j, y in enumerate(g.y_levels):
    print(f"  y = {int(y):+5d}: {describe_code(int(policy.codes(0)[0, j, g.p0_index]))}")

bt = BacktestParams(horizon=scheme.horizon, step=scheme.step, n_paths=4000)
for spec in (StrategySpec("policy", policy, name="optimal"), StrategySpec("constant")):
    m = run_monte_carlo(model, spec, bt).metrics
    print(f"{spec.label:>8}: mean {m.mean_profit:7.3f}  std {m.std_profit:7.3f}  "
          f"IR {m.information_ratio:6.3f}  volume {m.mean_total_volume:7.1f}")
