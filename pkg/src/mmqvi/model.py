"""Exogenous market model: fees, mid-quote diffusion, spread chain, fill
intensities and order/inventory bounds, plus the closed-form cash formulas
shared by the solver and the backtester.

Spread states are 1-based in documents and CSV files (state ``i`` means a
spread of ``i`` ticks) and 0-based in arrays.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
import warnings
from dataclasses import dataclass, replace
from typing import Any

import numpy as np

from .errors import ConfigError, DomainError

logger = logging.getLogger(__name__)

LEVELS = ("minus", "best", "plus")
LEVEL_OFFSET = {"minus": -1, "best": 0, "plus": 1}
BID_LABELS = ("Bb-", "Bb", "Bb+")
ASK_LABELS = ("Ba-", "Ba", "Ba+")


@dataclass(frozen=True)
class QuoteLevel:
    side: str
    level: str

    def __post_init__(self):
        if self.side not in ("bid", "ask"):
            raise ValueError(f"unknown side {self.side!r}")
        if self.level not in LEVELS:
            raise ValueError(f"unknown level {self.level!r}")

    @property
    def code(self) -> int:
        return LEVELS.index(self.level)

    @property
    def offset(self) -> int:
        """Price offset from the best quote, in ticks."""
        return LEVEL_OFFSET[self.level]

    @property
    def label(self) -> str:
        return (BID_LABELS if self.side == "bid" else ASK_LABELS)[self.code]

    @classmethod
    def from_label(cls, label: str) -> "QuoteLevel":
        if label in BID_LABELS:
            return cls("bid", LEVELS[BID_LABELS.index(label)])
        if label in ASK_LABELS:
            return cls("ask", LEVELS[ASK_LABELS.index(label)])
        raise ValueError(f"unknown quote label {label!r}")

    def mirror(self) -> "QuoteLevel":
        """Bid/ask mirror image: Bb- <-> Ba+, Bb <-> Ba, Bb+ <-> Ba-."""
        side = "ask" if self.side == "bid" else "bid"
        return QuoteLevel(side, LEVELS[2 - self.code])


BB_MINUS, BB, BB_PLUS = (QuoteLevel("bid", lv) for lv in LEVELS)
BA_MINUS, BA, BA_PLUS = (QuoteLevel("ask", lv) for lv in LEVELS)


def _frozen(a, dtype=float) -> np.ndarray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class FeeSchedule:
    tick: float = 0.01
    commission_rate: float = 0.0
    stamp_rate: float = 0.0


@dataclass(frozen=True)
class MidQuoteModel:
    p0: float = 14.0
    drift: float = 0.0
    vol: float = 0.005


@dataclass(frozen=True)
class SpreadModel:
    """Spread chain: Poisson jump clock with rate ``jump_rate`` and embedded
    transition matrix ``transition``. Rows are renormalized on construction."""

    n_states: int
    tick: float
    jump_rate: float
    transition: np.ndarray

    def __post_init__(self):
        mat = np.array(self.transition, dtype=float)
        if mat.shape != (self.n_states, self.n_states):
            raise ConfigError(
                f"transition matrix shape {mat.shape} does not match n_states={self.n_states}"
            )
        sums = mat.sum(axis=1)
        if np.any(sums <= 0):
            raise ConfigError("transition matrix has a row with non-positive sum")
        bad = np.abs(sums - 1.0) > 1e-6
        if np.any(bad):
            rows = [int(r) + 1 for r in np.flatnonzero(bad)]
            warnings.warn(f"transition rows {rows} renormalized (sums {sums[bad].tolist()})", stacklevel=3)
        object.__setattr__(self, "transition", _frozen(mat / sums[:, None]))

    def __eq__(self, other):
        if not isinstance(other, SpreadModel):
            return NotImplemented
        return ((self.n_states, self.tick, self.jump_rate) == (other.n_states, other.tick, other.jump_rate)
                and np.array_equal(self.transition, other.transition))

    __hash__ = None

    @property
    def spreads(self) -> np.ndarray:
        return self.tick * np.arange(1, self.n_states + 1)

    def stationary(self) -> np.ndarray:
        """Stationary law of the spread chain (uniform jump rate, so the
        embedded chain's left eigenvector serves)."""
        m = self.n_states
        if m == 1:
            return np.ones(1)
        a = np.vstack([self.transition.T - np.eye(m), np.ones(m)])
        b = np.zeros(m + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(a, b, rcond=None)
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum()


@dataclass(frozen=True)
class FillModel:
    """Fill intensities indexed ``[level_code, spread_index]`` (level codes
    0/1/2 = minus/best/plus, spread index 0-based)."""

    bid_intensity: np.ndarray
    ask_intensity: np.ndarray

    def __post_init__(self):
        b = np.array(self.bid_intensity, dtype=float)
        a = np.array(self.ask_intensity, dtype=float)
        if b.ndim != 2 or b.shape[0] != 3 or a.shape != b.shape:
            raise ConfigError(f"intensity tables must be 3 x m, got {b.shape} and {a.shape}")
        if not (np.all(np.isfinite(b)) and np.all(np.isfinite(a))):
            raise ConfigError("intensity tables contain missing or non-finite cells")
        object.__setattr__(self, "bid_intensity", _frozen(b))
        object.__setattr__(self, "ask_intensity", _frozen(a))

    def __eq__(self, other):
        if not isinstance(other, FillModel):
            return NotImplemented
        return (np.array_equal(self.bid_intensity, other.bid_intensity)
                and np.array_equal(self.ask_intensity, other.ask_intensity))

    __hash__ = None

    @property
    def n_states(self) -> int:
        return self.bid_intensity.shape[1]

    def intensity(self, level: QuoteLevel, spread_index: int) -> float:
        table = self.bid_intensity if level.side == "bid" else self.ask_intensity
        return float(table[level.code, spread_index])


def parametric_fill_model(scale: float, decay: float, n_states: int) -> FillModel:
    """lambda(q, s) = scale * exp(-decay * d), d = distance of the quote from
    the mid in ticks (i/2 - offset for bids, i/2 + offset for asks)."""
    half = np.arange(1, n_states + 1) / 2.0
    offs = np.array([-1.0, 0.0, 1.0])[:, None]
    bid = scale * np.exp(-decay * (half[None, :] - offs))
    ask = scale * np.exp(-decay * (half[None, :] + offs))
    return FillModel(bid, ask)


@dataclass(frozen=True)
class OrderBounds:
    max_limit: int = 100
    max_market: int = 100
    lot: int = 100
    y_min: int = -500
    y_max: int = 500

    @property
    def y_levels(self) -> np.ndarray:
        return np.arange(self.y_min, self.y_max + self.lot, self.lot, dtype=np.int64)


@dataclass(frozen=True)
class MarketModel:
    fees: FeeSchedule
    midquote: MidQuoteModel
    spread: SpreadModel
    fills: FillModel
    bounds: OrderBounds

    @property
    def tick(self) -> float:
        return self.fees.tick

    @property
    def n_states(self) -> int:
        return self.spread.n_states

    def with_(self, **changes) -> "MarketModel":
        """Copy with dotted-path overrides, e.g. ``with_(**{"midquote.vol": 0.007})``.

        A bare section name replaces that whole component.
        """
        model = self
        for key, value in changes.items():
            section, _, name = key.partition(".")
            if not name:
                model = replace(model, **{section: value})
                continue
            part = getattr(model, section)
            model = replace(model, **{section: replace(part, **{name: value})})
        return model

    # -- serialization -------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        m = self.n_states
        states = [str(i + 1) for i in range(m)]

        def table(arr, labels):
            return {lab: {s: float(arr[c, j]) for j, s in enumerate(states)} for c, lab in enumerate(labels)}

        return {
            "fees": {
                "tick": float(self.fees.tick),
                "commission_rate": float(self.fees.commission_rate),
                "stamp_rate": float(self.fees.stamp_rate),
            },
            "midquote": {
                "p0": float(self.midquote.p0),
                "drift": float(self.midquote.drift),
                "vol": float(self.midquote.vol),
            },
            "spread": {
                "n_states": int(m),
                "tick": float(self.spread.tick),
                "jump_rate": float(self.spread.jump_rate),
                "transition": [[float(v) for v in row] for row in self.spread.transition],
            },
            "fills": {
                "bid_intensity": table(self.fills.bid_intensity, BID_LABELS),
                "ask_intensity": table(self.fills.ask_intensity, ASK_LABELS),
            },
            "bounds": {
                "max_limit": int(self.bounds.max_limit),
                "max_market": int(self.bounds.max_market),
                "lot": int(self.bounds.lot),
                "y_min": int(self.bounds.y_min),
                "y_max": int(self.bounds.y_max),
            },
        }

    @classmethod
    def from_dict(cls, doc: dict[str, Any]) -> "MarketModel":
        try:
            fees = FeeSchedule(**doc["fees"])
            mid = MidQuoteModel(**doc["midquote"])
            spread = SpreadModel(**doc["spread"])
            m = spread.n_states
            fills_doc = doc["fills"]
            tables = []
            for key, labels in (("bid_intensity", BID_LABELS), ("ask_intensity", ASK_LABELS)):
                arr = np.full((3, m), np.nan)
                section = fills_doc[key]
                for c, lab in enumerate(labels):
                    for j in range(m):
                        try:
                            arr[c, j] = float(section[lab][str(j + 1)])
                        except KeyError:
                            raise ConfigError(f"missing fill intensity cell {key}[{lab}][{j + 1}]") from None
                tables.append(arr)
            fills = FillModel(*tables)
            bounds = OrderBounds(**doc["bounds"])
        except KeyError as exc:
            raise ConfigError(f"model document missing section or field {exc}") from None
        except TypeError as exc:
            raise ConfigError(f"bad model document: {exc}") from None
        return cls(fees=fees, midquote=mid, spread=spread, fills=fills, bounds=bounds)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_json(cls, text: str) -> "MarketModel":
        return cls.from_dict(json.loads(text))

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_json().encode("utf-8")).hexdigest()


def mirror_model(model: MarketModel) -> MarketModel:
    """Bid/ask mirror image: drift negated, bid intensities swapped with the
    mirrored ask levels. Fees are left as-is (the mirror is exact only when
    they are zero)."""
    fills = FillModel(model.fills.ask_intensity[::-1].copy(), model.fills.bid_intensity[::-1].copy())
    return replace(model, fills=fills, midquote=replace(model.midquote, drift=0.0 - model.midquote.drift))


# -- cash formulas ---------------------------------------------------------


def bid_price(level: QuoteLevel, p, s, fees: FeeSchedule):
    """Fee-inclusive cost per share of a bid filled at ``level``."""
    if level.side != "bid":
        raise ValueError("bid_price needs a bid level")
    raw = np.asarray(p) - np.asarray(s) / 2.0 + level.offset * fees.tick
    if np.any(raw <= 0):
        raise DomainError(f"non-positive bid price {raw}")
    out = raw * (1.0 + fees.commission_rate)
    return float(out) if np.ndim(out) == 0 else out


def ask_price(level: QuoteLevel, p, s, fees: FeeSchedule):
    """Fee- and tax-net proceeds per share of an ask filled at ``level``."""
    if level.side != "ask":
        raise ValueError("ask_price needs an ask level")
    raw = np.asarray(p) + np.asarray(s) / 2.0 + level.offset * fees.tick
    if np.any(raw <= 0):
        raise DomainError(f"non-positive ask price {raw}")
    out = raw * (1.0 - fees.commission_rate - fees.stamp_rate)
    return float(out) if np.ndim(out) == 0 else out


def market_cash(e, p, s, fees: FeeSchedule):
    """Cash paid for a market order of signed size ``e`` (negative = sell,
    in which case the result is negative: cash received)."""
    e = np.asarray(e, dtype=float)
    eps, rho = fees.commission_rate, fees.stamp_rate
    ae = np.abs(e)
    sell = (e < 0).astype(float)
    out = (e + eps * ae + rho * ae * sell) * p + (ae + eps * e + rho * e * sell) * np.asarray(s) / 2.0
    return float(out) if np.ndim(out) == 0 else out


def liquidation_value(x, y, p, s, fees: FeeSchedule):
    """Cash after unwinding inventory ``y`` with one market order."""
    out = np.asarray(x, dtype=float) - market_cash(-np.asarray(y, dtype=float), p, s, fees)
    return float(out) if np.ndim(out) == 0 else out


def sell_tax(e, p, s, fees: FeeSchedule):
    """Stamp duty paid on a market order of size ``e`` (zero for buys)."""
    e = np.asarray(e, dtype=float)
    out = fees.stamp_rate * np.where(e < 0, -e, 0.0) * (p - np.asarray(s) / 2.0)
    return float(out) if np.ndim(out) == 0 else out


# -- validation ------------------------------------------------------------


def validate_model(model: MarketModel) -> list[str]:
    """Return the list of violated invariants (empty when the model is valid)."""
    problems: list[str] = []
    f = model.fees
    if not f.tick > 0:
        problems.append(f"fees.tick must be > 0 (got {f.tick})")
    if not 0 <= f.commission_rate < 1:
        problems.append(f"fees.commission_rate must lie in [0, 1) (got {f.commission_rate})")
    if not 0 <= f.stamp_rate < 1:
        problems.append(f"fees.stamp_rate must lie in [0, 1) (got {f.stamp_rate})")
    if not f.commission_rate + f.stamp_rate < 1:
        problems.append("commission_rate + stamp_rate must be < 1")

    mq = model.midquote
    if not mq.vol >= 0:
        problems.append(f"midquote.vol must be >= 0 (got {mq.vol})")
    if not mq.p0 > 0:
        problems.append(f"midquote.p0 must be > 0 (got {mq.p0})")

    sp = model.spread
    if sp.n_states < 1:
        problems.append("spread.n_states must be >= 1")
    if not math.isclose(sp.tick, f.tick, rel_tol=1e-12):
        problems.append(f"spread.tick {sp.tick} differs from fees.tick {f.tick}")
    if not sp.jump_rate >= 0:
        problems.append(f"spread.jump_rate must be >= 0 (got {sp.jump_rate})")
    tr = sp.transition
    if np.any(tr < 0):
        problems.append("spread.transition has negative entries")
    if np.any(np.abs(tr.sum(axis=1) - 1.0) > 1e-9):
        problems.append("spread.transition rows do not sum to 1")
    if sp.n_states > 1 and np.any(np.diag(tr) != 0):
        problems.append("spread.transition diagonal must be 0 when n_states > 1")

    fl = model.fills
    if fl.n_states != sp.n_states:
        problems.append(f"fill tables cover {fl.n_states} spread states, chain has {sp.n_states}")
    for name, table in (("bid", fl.bid_intensity), ("ask", fl.ask_intensity)):
        if np.any(table < 0):
            problems.append(f"{name} intensities must be >= 0")
    for j in range(fl.n_states):
        b = fl.bid_intensity[:, j]
        if not (b[0] < b[1] < b[2]):
            problems.append(f"bid intensities not strictly increasing Bb- < Bb < Bb+ at spread state {j + 1}: {b.tolist()}")
        a = fl.ask_intensity[:, j]
        if not (a[2] < a[1] < a[0]):
            problems.append(f"ask intensities not strictly decreasing Ba- > Ba > Ba+ at spread state {j + 1}: {a.tolist()}")

    b = model.bounds
    if b.lot <= 0:
        problems.append("bounds.lot must be > 0")
    else:
        for name in ("max_limit", "max_market"):
            v = getattr(b, name)
            if v <= 0 or v % b.lot:
                problems.append(f"bounds.{name} must be a positive multiple of lot (got {v})")
        if b.y_min % b.lot or b.y_max % b.lot:
            problems.append("bounds.y_min and bounds.y_max must be multiples of lot")
    if not b.y_min <= 0 <= b.y_max:
        problems.append("bounds must satisfy y_min <= 0 <= y_max")

    if sp.n_states >= 1 and f.tick > 0:
        worst = mq.p0 - sp.n_states * f.tick / 2.0 - f.tick
        if worst <= 0:
            problems.append("p0 too small: lowest bid quote is non-positive")
    return problems


# Empirical spread-chain transitions for a liquid reference stock (rows sum to
# 1 up to rounding).
REFERENCE_TRANSITION = (
    (0.0, 0.9404, 0.0596),
    (0.9557, 0.0, 0.0443),
    (0.4074, 0.5925, 0.0),
)

# Synthetic fill-intensity surface used by the baseline preset.
BASELINE_FILL_SCALE = 0.4
BASELINE_FILL_DECAY = 1.2


def baseline_model(**overrides) -> MarketModel:
    """Baseline parameter set: P0 = 14, sigma = 0.005, lambda = 1, reference
    spread chain, l = e = 100, inventory in [-500, 500], fee-free."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        spread = SpreadModel(3, 0.01, 1.0, REFERENCE_TRANSITION)
    model = MarketModel(
        fees=FeeSchedule(0.01, 0.0, 0.0),
        midquote=MidQuoteModel(14.0, 0.0, 0.005),
        spread=spread,
        fills=parametric_fill_model(BASELINE_FILL_SCALE, BASELINE_FILL_DECAY, 3),
        bounds=OrderBounds(100, 100, 100, -500, 500),
    )
    return model.with_(**overrides) if overrides else model
