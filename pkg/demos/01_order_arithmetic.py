"""Where the money goes on a single trade.

Walks through the quote ladder, fees and stamp duty for one spread state, then
shows why a round trip through the book can never make money.
"""
from __future__ import annotations

from mmqvi.model import (
    BA, BA_MINUS, BA_PLUS, BB, BB_MINUS, BB_PLUS, FeeSchedule, ask_price, bid_price, liquidation_value,
    market_cash,
)

p, s = 14.00, 0.02
free = FeeSchedule(tick=0.01, commission_rate=0.0, stamp_rate=0.0)
taxed = FeeSchedule(tick=0.01, commission_rate=0.0003, stamp_rate=0.001)

print(f"mid {p:.2f}, spread {s:.2f}")
print(f"{'level':>6} {'fee-free':>10} {'with fees':>10}")
# bid quotes show the cash paid per share, ask quotes the cash kept after fees
for q in (BB_MINUS, BB, BB_PLUS):
    print(f"{q.label:>6} {bid_price(q, p, s, free):10.5f} {bid_price(q, p, s, taxed):10.5f}")
for q in (BA_MINUS, BA, BA_PLUS):
    print(f"{q.label:>6} {ask_price(q, p, s, free):10.5f} {ask_price(q, p, s, taxed):10.5f}")

# A market buy of one lot, then closing it straight away at the bid.
for fees, name in ((free, "fee-free"), (taxed, "with fees")):
    cost = market_cash(100, p, s, fees)
    back = liquidation_value(-cost, 100, p, s, fees)
    print(f"{name}: buy 100 for {cost:.4f}, flatten immediately -> P&L {back:+.4f}")
