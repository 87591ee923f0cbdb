"""Small numerical kernels: ordered log-sum-exp and Gauss-Hermite nodes.

Reductions here accumulate in a fixed Python-level order so that a value
computed for one node never depends on how the surrounding array is shaped or
split between threads.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Sequence

import numpy as np
from numpy.polynomial.hermite_e import hermegauss


def logsumexp_terms(terms: Sequence[np.ndarray], log_weights: Sequence[float] | None = None) -> np.ndarray:
    """log(sum_k w_k * exp(terms[k])) for arrays of identical shape.

    Weights are given in log space; ``-inf`` terms or weights contribute zero.
    """
    if log_weights is None:
        log_weights = [0.0] * len(terms)
    shifted = [np.asarray(t, dtype=float) + lw for t, lw in zip(terms, log_weights)]
    top = shifted[0]
    for s in shifted[1:]:
        top = np.maximum(top, s)
    # all -inf -> keep -inf without nan
    safe_top = np.where(np.isfinite(top), top, 0.0)
    acc = np.zeros_like(safe_top)
    with np.errstate(invalid="ignore", over="ignore"):
        for s in shifted:
            acc = acc + np.exp(s - safe_top)
    with np.errstate(divide="ignore"):
        return safe_top + np.log(acc)


def logmeanexp_terms(terms: Sequence[np.ndarray]) -> np.ndarray:
    """log(mean_k exp(terms[k])); exact when all terms are equal."""
    top = terms[0]
    for t in terms[1:]:
        top = np.maximum(top, t)
    acc = np.zeros_like(top)
    for t in terms:
        acc = acc + np.exp(t - top)
    return top + np.log(acc / len(terms))


def logaddexp2(a: np.ndarray, log_wa: float | np.ndarray, b: np.ndarray, log_wb: float | np.ndarray) -> np.ndarray:
    """log(exp(log_wa + a) + exp(log_wb + b)) with -inf weights allowed."""
    with np.errstate(invalid="ignore"):
        return np.logaddexp(a + log_wa, b + log_wb)


@lru_cache(maxsize=32)
def gauss_hermite_normal(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes z and weights w with sum(w * f(z)) ~= E[f(Z)], Z ~ N(0, 1)."""
    if n < 1:
        raise ValueError("need at least one quadrature node")
    z, w = hermegauss(n)
    w = w / np.sqrt(2.0 * np.pi)
    z.setflags(write=False)
    w.setflags(write=False)
    return z, w
