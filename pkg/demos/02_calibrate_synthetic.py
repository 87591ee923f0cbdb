"""Calibrate a market model from data we generated ourselves.

Synthetic best-bid/ask snapshots and an own-quote log are drawn from the
baseline model, then fed back through the estimators. The recovered numbers
should sit within a few standard errors of the truth.
"""
from __future__ import annotations

import numpy as np

from mmqvi.calibration import calibrate, simulate_market_data
from mmqvi.model import baseline_model

truth = baseline_model()
data = simulate_market_data(truth, horizon=4 * 3600.0, seed=7)
print(f"{len(data.snapshots)} snapshots, {len(data.quotes)} quote-log events")

report = calibrate(data.snapshots, data.quotes, tick=truth.tick, n_states=truth.n_states)
fit = report.model
se = report.standard_errors

print(f"jump rate   {fit.spread.jump_rate:.4f}  (true {truth.spread.jump_rate}, se {se.get('jump_rate', float('nan')):.4f})")
print(f"volatility  {fit.midquote.vol:.5f} (true {truth.midquote.vol}, se {se.get('vol', float('nan')):.5f})")
print(f"drift       {fit.midquote.drift:+.2e} (true {truth.midquote.drift})")
print("transition matrix:")
print(np.array2string(fit.spread.transition, precision=3))
print("bid intensities (rows Bb-, Bb, Bb+; columns spread state):")
print(np.array2string(fit.fills.bid_intensity, precision=3))
for note in report.notes:
    print("note:", note)
