"""Binary policy artifact.

Layout: one line of compact JSON (sorted keys) terminated by ``\\n``, followed
by a packed little-endian record array in row-major ``[t, spread, y, p]``
order. Each record is ``u1 kind, u1 bid level, u1 ask level, i2 bid lots,
i2 ask lots, i2 market lots``.
"""
from __future__ import annotations

import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import ArtifactMismatch, DataError
from .model import MarketModel
from .solver import TIE_BREAK_VERSION, PolicyTensor, StateGrid

FORMAT = "mmqvi-policy"
VERSION = 1
RECORD = np.dtype([("kind", "u1"), ("qb", "u1"), ("qa", "u1"),
                   ("lb", "<i2"), ("la", "<i2"), ("e", "<i2")])


def _header(policy: PolicyTensor) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "model_fingerprint": policy.model_fingerprint,
        "grid": policy.grid.to_dict(),
        "scheme": policy.scheme,
        "tie_break_version": TIE_BREAK_VERSION,
        "dims": list(policy.grid.shape),
        "record": [[name, RECORD.fields[name][0].str] for name in RECORD.names],
    }


def policy_bytes(policy: PolicyTensor, model: MarketModel | None = None) -> bytes:
    """Serialize ``policy``; if ``model`` is given its fingerprint must match."""
    if model is not None and policy.model_fingerprint != model.fingerprint():
        raise ArtifactMismatch("policy was not solved for this model")
    head = json.dumps(_header(policy), sort_keys=True, separators=(",", ":")).encode("utf-8")
    rec = np.empty(policy.grid.shape, dtype=RECORD)
    rec["kind"] = policy.kind
    rec["qb"] = policy.bid_level
    rec["qa"] = policy.ask_level
    rec["lb"] = policy.bid_lots
    rec["la"] = policy.ask_lots
    rec["e"] = policy.market_lots
    return head + b"\n" + rec.tobytes(order="C")


def export_policy(policy: PolicyTensor, path, model: MarketModel | None = None) -> str:
    """Write the artifact and return its sha256 hex digest."""
    data = policy_bytes(policy, model)
    Path(path).write_bytes(data)
    return hashlib.sha256(data).hexdigest()


def policy_from_bytes(data: bytes) -> PolicyTensor:
    nl = data.find(b"\n")
    if nl < 0:
        raise DataError("policy artifact has no header line")
    try:
        head = json.loads(data[:nl].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise DataError(f"unreadable policy header: {exc}") from exc
    if head.get("format") != FORMAT or head.get("version") != VERSION:
        raise DataError("not a supported policy artifact")
    if head.get("tie_break_version") != TIE_BREAK_VERSION:
        raise DataError("policy artifact uses a different tie-break version")
    grid = StateGrid.from_dict(head["grid"])
    dims = tuple(head["dims"])
    if dims != grid.shape:
        raise DataError(f"artifact dims {dims} disagree with grid {grid.shape}")
    body = data[nl + 1:]
    if len(body) != RECORD.itemsize * int(np.prod(dims)):
        raise DataError("policy artifact body has the wrong length")
    rec = np.frombuffer(body, dtype=RECORD).reshape(dims)
    return PolicyTensor(
        kind=rec["kind"].copy(), bid_level=rec["qb"].copy(), ask_level=rec["qa"].copy(),
        bid_lots=rec["lb"].astype(np.int16), ask_lots=rec["la"].astype(np.int16),
        market_lots=rec["e"].astype(np.int16), grid=grid,
        model_fingerprint=head["model_fingerprint"], scheme=head["scheme"],
    )


def import_policy(path) -> PolicyTensor:
    return policy_from_bytes(Path(path).read_bytes())
