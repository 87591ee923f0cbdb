"""Explicit backward scheme for the market maker's quasi-variational inequality
under exponential (CARA) utility.

With ``v_i(t, x, y, p) = -exp(-eta * x + psi_i(t, y, p))`` every fill and
market order shifts cash additively, so the cash dimension factors out and the
scheme is solved for ``psi`` on a (time, spread, inventory, price) grid.
Maximizing ``v`` is minimizing ``psi``; every expectation becomes a log-sum-exp.

One backward step combines four one-source expectations over a window of
``kappa * h`` (price diffusion, spread jump, bid fill, ask fill) with equal
weights, then compares the result against the best market order.
"""
from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import ConfigError, ResourceError
from .model import LEVELS, MarketModel, QuoteLevel, market_cash, validate_model
from .numerics import gauss_hermite_normal, logaddexp2, logmeanexp_terms, logsumexp_terms

MAKE, TAKE = 0, 1
# enumeration order for quote levels (first minimum wins)
BID_ORDER = (0, 1, 2)  # Bb-, Bb, Bb+
ASK_ORDER = (2, 1, 0)  # Ba+, Ba, Ba-
TIE_BREAK_VERSION = 1


@dataclass(frozen=True)
class SchemeParams:
    horizon: float = 300.0
    step: float = 0.3
    generator_window: float = 4.0
    quad_nodes: int = 7
    p_halfwidth: float | None = None
    p_step: float | None = None
    risk_aversion: float = 0.5
    gamma: float = 0.0
    cash_scale: float = 1.0
    max_memory_bytes: int = 2 * 1024**3

    def __post_init__(self):
        if self.gamma != 0:
            raise ConfigError("inventory penalty gamma must be 0 (exponential-utility factorization)")
        if not 0 < self.step <= self.horizon:
            raise ConfigError(f"need 0 < step <= horizon (step={self.step}, horizon={self.horizon})")
        ratio = self.horizon / self.step
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
            raise ConfigError(f"horizon/step must be an integer (got {ratio})")
        if self.generator_window < 1:
            raise ConfigError("generator_window must be >= 1")
        if self.quad_nodes < 3 or self.quad_nodes % 2 == 0:
            raise ConfigError("quad_nodes must be odd and >= 3")
        if self.p_step is not None and not self.p_step > 0:
            raise ConfigError("p_step must be > 0")
        if self.p_halfwidth is not None and not self.p_halfwidth > 0:
            raise ConfigError("p_halfwidth must be > 0")
        if not self.risk_aversion > 0:
            raise ConfigError("risk_aversion must be > 0")
        if not self.cash_scale > 0:
            raise ConfigError("cash_scale must be > 0")

    @property
    def n_steps(self) -> int:
        return int(round(self.horizon / self.step))

    @property
    def eta(self) -> float:
        """Risk aversion per unit of (possibly rescaled) cash."""
        return self.risk_aversion / self.cash_scale

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class StateGrid:
    """Time x spread x inventory x price lattice.

    Prices are ``p0 + k * p_step`` for integer ``k`` in ``[-half_steps, half_steps]``.
    """

    n_steps: int
    step: float
    n_states: int
    tick: float
    y_levels: np.ndarray
    lot: int
    p0: float
    p_step: float
    half_steps: int

    @classmethod
    def build(cls, model: MarketModel, params: SchemeParams) -> "StateGrid":
        mq = model.midquote
        p_step = params.p_step if params.p_step is not None else model.tick
        if params.p_halfwidth is not None:
            half = params.p_halfwidth
        else:
            half = abs(mq.drift) * params.horizon + 6.0 * mq.vol * math.sqrt(params.horizon)
        half_steps = max(1, int(math.ceil(half / p_step - 1e-9)))
        ys = model.bounds.y_levels
        if len(ys) < 2:
            raise ConfigError("inventory lattice needs at least two levels")
        ys = np.array(ys)
        ys.setflags(write=False)
        return cls(params.n_steps, params.step, model.n_states, model.tick, ys,
                   model.bounds.lot, mq.p0, p_step, half_steps)

    @property
    def n_y(self) -> int:
        return len(self.y_levels)

    @property
    def n_p(self) -> int:
        return 2 * self.half_steps + 1

    @property
    def shape(self) -> tuple[int, int, int, int]:
        return (self.n_steps + 1, self.n_states, self.n_y, self.n_p)

    @property
    def p_levels(self) -> np.ndarray:
        return self.p0 + self.p_step * np.arange(-self.half_steps, self.half_steps + 1)

    @property
    def spreads(self) -> np.ndarray:
        return self.tick * np.arange(1, self.n_states + 1)

    @property
    def y0_index(self) -> int:
        return int(np.flatnonzero(self.y_levels == 0)[0])

    @property
    def p0_index(self) -> int:
        return self.half_steps

    def y_index(self, y) -> np.ndarray:
        return (np.asarray(y) - self.y_levels[0]) // self.lot

    def p_index(self, p) -> np.ndarray:
        """Nearest price node, ties toward p0, clamped to the lattice."""
        k = (np.asarray(p, dtype=float) - self.p0) / self.p_step
        k = np.round(k, 9)  # tick units; absorbs representation noise before the tie rule
        near = np.sign(k) * np.ceil(np.abs(k) - 0.5)
        return (np.clip(near, -self.half_steps, self.half_steps) + self.half_steps).astype(np.int64)

    def to_dict(self) -> dict:
        return {
            "n_steps": int(self.n_steps),
            "step": float(self.step),
            "n_states": int(self.n_states),
            "tick": float(self.tick),
            "y_min": int(self.y_levels[0]),
            "y_max": int(self.y_levels[-1]),
            "lot": int(self.lot),
            "p0": float(self.p0),
            "p_step": float(self.p_step),
            "half_steps": int(self.half_steps),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StateGrid":
        ys = np.arange(d["y_min"], d["y_max"] + d["lot"], d["lot"], dtype=np.int64)
        ys.setflags(write=False)
        return cls(d["n_steps"], d["step"], d["n_states"], d["tick"], ys, d["lot"],
                   d["p0"], d["p_step"], d["half_steps"])

    def nbytes_estimate(self) -> int:
        # float64 value + 9-byte action record per node
        return int(np.prod(self.shape)) * (8 + 9)


@dataclass
class LogValueTensor:
    """psi[t, i, y, p] with v_i(t, x, y, p) = -exp(-eta * x + psi)."""

    psi: np.ndarray
    grid: StateGrid
    eta: float

    def value(self, x, t: int, i: int, y_idx: int, p_idx: int):
        return -np.exp(-self.eta * np.asarray(x, dtype=float) + self.psi[t, i, y_idx, p_idx])


@dataclass(frozen=True)
class Action:
    kind: str
    bid_level: QuoteLevel | None = None
    ask_level: QuoteLevel | None = None
    bid_size: int = 0
    ask_size: int = 0
    market_size: int = 0


@dataclass
class PolicyTensor:
    """Per-node actions stored as parallel integer arrays.

    ``kind`` 0 = make, 1 = take; ``bid_level``/``ask_level`` are level codes
    0/1/2 (minus/best/plus); sizes and ``market`` are in lots.
    """

    kind: np.ndarray
    bid_level: np.ndarray
    ask_level: np.ndarray
    bid_lots: np.ndarray
    ask_lots: np.ndarray
    market_lots: np.ndarray
    grid: StateGrid
    model_fingerprint: str = ""
    scheme: dict = field(default_factory=dict)

    @classmethod
    def empty(cls, grid: StateGrid, fingerprint: str = "", scheme: dict | None = None) -> "PolicyTensor":
        shape = grid.shape
        return cls(
            np.zeros(shape, np.uint8), np.zeros(shape, np.uint8), np.full(shape, 2, np.uint8),
            np.zeros(shape, np.int16), np.zeros(shape, np.int16), np.zeros(shape, np.int16),
            grid, fingerprint, dict(scheme or {}),
        )

    def action(self, t: int, i: int, y_idx: int, p_idx: int) -> Action:
        key = (t, i, y_idx, p_idx)
        lot = self.grid.lot
        if self.kind[key] == TAKE:
            return Action("take", market_size=int(self.market_lots[key]) * lot)
        return Action(
            "make",
            QuoteLevel("bid", LEVELS[self.bid_level[key]]),
            QuoteLevel("ask", LEVELS[self.ask_level[key]]),
            int(self.bid_lots[key]) * lot,
            int(self.ask_lots[key]) * lot,
        )

    def codes(self, t: int | slice = slice(None)) -> np.ndarray:
        """Compact integer action code per node (see ``describe_code``)."""
        return encode_action_codes(self.kind[t], self.bid_level[t], self.ask_level[t],
                                   self.bid_lots[t], self.ask_lots[t], self.market_lots[t])


def encode_action_codes(kind, qb, qa, lb, la, e) -> np.ndarray:
    """Single integer per action: take -> 100000 + e_lots (signed offset 1000);
    make -> qb*1000 + qa*100 + lb_lots*10 + la_lots (lot counts < 10)."""
    kind = np.asarray(kind)
    make = (np.asarray(qb, np.int64) * 1000 + np.asarray(qa, np.int64) * 100
            + np.asarray(lb, np.int64) * 10 + np.asarray(la, np.int64))
    take = 100000 + 1000 + np.asarray(e, np.int64)
    return np.where(kind == TAKE, take, make)


def describe_code(code: int) -> str:
    if code >= 100000:
        return f"take({code - 101000:+d} lots)"
    qb, rest = divmod(code, 1000)
    qa, rest = divmod(rest, 100)
    lb, la = divmod(rest, 10)
    return f"make(bid {('Bb-', 'Bb', 'Bb+')[qb]} x{lb}, ask {('Ba-', 'Ba', 'Ba+')[qa]} x{la})"


class Scheme:
    """Precomputed constants of one backward step for a given model/grid."""

    def __init__(self, model: MarketModel, params: SchemeParams, grid: StateGrid | None = None):
        self.model = model
        self.params = params
        self.grid = grid if grid is not None else StateGrid.build(model, params)
        g = self.grid
        self.eta = params.eta
        self.window = params.generator_window * params.step
        fees = model.fees
        self.p = g.p_levels  # (np,)
        self.s = g.spreads  # (m,)
        self.y = g.y_levels  # (ny,)
        lot = g.lot
        b = model.bounds

        # price expectation: node displacements in index units
        mq = model.midquote
        scale = mq.vol * math.sqrt(self.window)
        if scale == 0.0:
            z, w = np.zeros(1), np.ones(1)
        else:
            z, w = gauss_hermite_normal(params.quad_nodes)
        self.quad_shift = (mq.drift * self.window + scale * np.asarray(z)) / g.p_step
        self.quad_logw = np.log(np.asarray(w))

        # spread mixing
        lam = model.spread.jump_rate
        q = -math.expm1(-lam * self.window)
        self.jump_logq = math.log(q) if q > 0 else -math.inf
        self.stay_log = math.log1p(-q)
        with np.errstate(divide="ignore"):
            self.log_trans = np.log(model.spread.transition)

        # fills: candidate sizes in lots, per inventory level
        lmax = (b.max_limit // lot) * lot
        self.bid_lots = (np.minimum(lmax, b.y_max - self.y) // lot).clip(0).astype(np.int64)
        self.ask_lots = (np.minimum(lmax, self.y - b.y_min) // lot).clip(0).astype(np.int64)
        offs = np.array([-1.0, 0.0, 1.0])
        raw_b = self.p[None, None, :] - self.s[None, :, None] / 2.0 + offs[:, None, None] * g.tick
        raw_a = self.p[None, None, :] + self.s[None, :, None] / 2.0 + offs[:, None, None] * g.tick
        self.pi_bid = raw_b * (1.0 + fees.commission_rate)  # (3, m, np)
        self.pi_ask = raw_a * (1.0 - fees.commission_rate - fees.stamp_rate)
        p1_b = -np.expm1(-model.fills.bid_intensity * self.window)  # (3, m)
        p1_a = -np.expm1(-model.fills.ask_intensity * self.window)
        with np.errstate(divide="ignore"):
            self.fill_log_b = np.log(p1_b)
            self.fill_log_a = np.log(p1_a)
        self.nofill_log_b = np.log1p(-p1_b)
        self.nofill_log_a = np.log1p(-p1_a)

        # impulses: |e| ascending, negative first at equal magnitude
        emax = b.max_market // lot
        self.impulse_lots = [s * k for k in range(1, emax + 1) for s in (-1, 1)]
        self.impulse_cost = {
            e: self.eta * market_cash(e * lot, self.p[None, :], self.s[:, None], fees)  # (m, np)
            for e in self.impulse_lots
        }

    # -- terminal -------------------------------------------------------------

    def terminal(self) -> np.ndarray:
        """psi_i(T, y, p) = eta * c(-y, p, i*delta)."""
        y = self.y.astype(float)
        c = market_cash(-y[None, :, None], self.p[None, None, :], self.s[:, None, None], self.model.fees)
        return np.ascontiguousarray(self.eta * c)

    # -- the four one-source expectations --------------------------------------

    def price_expectation(self, psi_next: np.ndarray) -> np.ndarray:
        """log E[exp(psi(t+h, y, P))], P ~ N(p + mu*w, sigma^2*w), w = kappa*h."""
        n_p = psi_next.shape[-1]
        j = np.arange(n_p, dtype=float)
        terms = []
        for d in self.quad_shift:
            f = j + d
            # beyond the lattice the edge segment is extended linearly
            i0 = np.clip(np.floor(f).astype(np.int64), 0, n_p - 2)
            wt = f - i0
            terms.append(psi_next[..., i0] * (1.0 - wt) + psi_next[..., i0 + 1] * wt)
        if len(terms) == 1:
            return terms[0]
        return logsumexp_terms(terms, list(self.quad_logw))

    def spread_expectation(self, psi_next: np.ndarray, rows=None) -> np.ndarray:
        """One-jump mixture over the window: stay with prob. exp(-lambda*w),
        else move to state j with prob. rho_ij."""
        rows = range(psi_next.shape[0]) if rows is None else rows
        out = []
        for i in rows:
            if self.jump_logq == -math.inf:
                out.append(psi_next[i].copy())
                continue
            mix = logsumexp_terms([psi_next[j] for j in range(psi_next.shape[0])], self.log_trans[i])
            out.append(logaddexp2(psi_next[i], self.stay_log, mix, self.jump_logq))
        return np.stack(out)

    def fill_best_response(self, side: str, psi_next: np.ndarray, rows=None):
        """Best (level, size) for one side. Returns (value, level_code, lots),
        each shaped like the selected rows of ``psi_next``."""
        rows = list(range(psi_next.shape[0])) if rows is None else list(rows)
        sub = psi_next[rows]
        value = sub.copy()
        level = np.zeros(sub.shape, np.uint8) if side == "bid" else np.full(sub.shape, 2, np.uint8)
        lots = np.zeros(sub.shape, np.int16)
        if side == "bid":
            sizes, order, pi = self.bid_lots, BID_ORDER, self.pi_bid
            fill_log, nofill_log, sign = self.fill_log_b, self.nofill_log_b, 1.0
        else:
            sizes, order, pi = self.ask_lots, ASK_ORDER, self.pi_ask
            fill_log, nofill_log, sign = self.fill_log_a, self.nofill_log_a, -1.0
        ny = sub.shape[1]
        yi = np.arange(ny)
        step = sizes
        target = yi + int(sign) * step  # inventory index after a fill
        can = sizes > 0
        psi_after = sub[:, target, :]  # (r, ny, np)
        size_sh = (sizes * self.grid.lot).astype(float)
        for c in order:
            cash = sign * self.eta * pi[c][rows][:, None, :] * size_sh[None, :, None]
            shifted = cash + psi_after
            lf = fill_log[c][rows][:, None, None]
            ln = nofill_log[c][rows][:, None, None]
            val = logaddexp2(sub, ln, shifted, lf)
            better = can[None, :, None] & (val < value)
            value = np.where(better, val, value)
            level = np.where(better, np.uint8(c), level)
            lots = np.where(better, step[None, :, None].astype(np.int16), lots)
        return value, level, lots

    def impulse_value(self, psi_next: np.ndarray, rows=None, include_zero: bool = False):
        """Best market order: min over e of eta*c(e, p, s) + psi(t+h, y+e, p).

        Returns (value, lots). With ``include_zero`` the do-nothing order e = 0
        is a candidate (value psi(t+h, y, p)); otherwise only real orders are.
        """
        rows = list(range(psi_next.shape[0])) if rows is None else list(rows)
        sub = psi_next[rows]
        ny = sub.shape[1]
        if include_zero:
            value = sub.copy()
        else:
            value = np.full(sub.shape, np.inf)
        lots = np.zeros(sub.shape, np.int16)
        yi = np.arange(ny)
        for e in self.impulse_lots:
            tgt = yi + e
            ok = (tgt >= 0) & (tgt < ny)
            tgt_c = np.clip(tgt, 0, ny - 1)
            val = self.impulse_cost[e][rows][:, None, :] + sub[:, tgt_c, :]
            better = ok[None, :, None] & (val < value)
            value = np.where(better, val, value)
            lots = np.where(better, np.int16(e), lots)
        return value, lots

    # -- one backward step ---------------------------------------------------

    def step(self, psi_next: np.ndarray, rows=None):
        """psi(t) and the optimal action for the selected spread rows."""
        rows = list(range(psi_next.shape[0])) if rows is None else list(rows)
        sub = np.ascontiguousarray(psi_next[rows])
        a = self.price_expectation(sub)
        b = self.spread_expectation(psi_next, rows)
        cb, qb, lb = self.fill_best_response("bid", psi_next, rows)
        ca, qa, la = self.fill_best_response("ask", psi_next, rows)
        cont = logmeanexp_terms([a, b, cb, ca])
        imp, e = self.impulse_value(psi_next, rows)
        take = imp < cont
        psi = np.where(take, imp, cont)
        kind = take.astype(np.uint8)
        # take nodes carry the default (unused) quote levels
        qb = np.where(take, np.uint8(0), qb)
        qa = np.where(take, np.uint8(2), qa)
        return psi, (kind, qb, qa, np.where(take, 0, lb).astype(np.int16),
                     np.where(take, 0, la).astype(np.int16), np.where(take, e, 0).astype(np.int16))


# -- module-level operator API -------------------------------------------------


def terminal_condition(grid: StateGrid, model: MarketModel, params: SchemeParams) -> np.ndarray:
    return Scheme(model, params, grid).terminal()


def price_expectation(psi_next, model, params, grid=None):
    return Scheme(model, params, grid).price_expectation(psi_next)


def spread_expectation(psi_next, model, params, grid=None):
    return Scheme(model, params, grid).spread_expectation(psi_next)


def fill_best_response(side, psi_next, model, params, grid=None):
    return Scheme(model, params, grid).fill_best_response(side, psi_next)


def impulse_value(psi_next, model, params, grid=None, include_zero=False):
    return Scheme(model, params, grid).impulse_value(psi_next, include_zero=include_zero)


def step_operator(psi_next, model, params, grid=None):
    return Scheme(model, params, grid).step(psi_next)


def solve_backward(model: MarketModel, params: SchemeParams, threads: int = 1,
                   grid: StateGrid | None = None, validate: bool = True):
    """Terminal condition, then one step per time node from n-1 down to 0.

    Returns ``(LogValueTensor, PolicyTensor)``. Spread rows of one time step
    are independent, so ``threads > 1`` splits them across a thread pool; the
    result does not depend on the thread count.
    """
    if validate:
        problems = validate_model(model)
        if problems:
            raise ConfigError("invalid market model: " + "; ".join(problems))
    grid = grid if grid is not None else StateGrid.build(model, params)
    need = grid.nbytes_estimate()
    if need > params.max_memory_bytes:
        raise ResourceError(
            f"grid {grid.shape} needs about {need / 2**20:.1f} MiB, budget {params.max_memory_bytes / 2**20:.1f} MiB"
        )
    scheme = Scheme(model, params, grid)
    psi = np.empty(grid.shape)
    policy = PolicyTensor.empty(grid, model.fingerprint(), params.to_dict())
    psi[-1] = scheme.terminal()

    m = grid.n_states
    threads = max(1, min(int(threads), m))
    chunks = [list(r) for r in np.array_split(np.arange(m), threads)]
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for k in range(grid.n_steps - 1, -1, -1):
            nxt = psi[k + 1]
            if pool is None:
                results = [(chunks[0], scheme.step(nxt, chunks[0]))]
            else:
                results = list(zip(chunks, pool.map(lambda r: scheme.step(nxt, r), chunks)))
            for rows, (val, acts) in results:
                psi[k, rows] = val
                for arr, a in zip((policy.kind, policy.bid_level, policy.ask_level,
                                   policy.bid_lots, policy.ask_lots, policy.market_lots), acts):
                    arr[k, rows] = a
    finally:
        if pool is not None:
            pool.shutdown()
    return LogValueTensor(psi, grid, params.eta), policy


def timed_solve(model, params, threads=1):
    t0 = time.perf_counter()
    out = solve_backward(model, params, threads=threads)
    return out, time.perf_counter() - t0
