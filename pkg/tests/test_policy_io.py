from __future__ import annotations

import json

import numpy as np
import pytest

from conftest import small_model

from mmqvi.errors import ArtifactMismatch, DataError
from mmqvi.policy_io import RECORD, export_policy, import_policy, policy_bytes, policy_from_bytes
from mmqvi.solver import TIE_BREAK_VERSION, SchemeParams, solve_backward


@pytest.fixture(scope="module")
def solved():
    m = small_model(3, p0=14.0, vol=0.01, rho=0.001)
    _, pol = solve_backward(m, SchemeParams(horizon=3.0, step=0.3, p_halfwidth=0.1, p_step=0.01))
    return m, pol


def test_round_trip_is_byte_identical(solved, tmp_path):
    m, pol = solved
    h1 = export_policy(pol, tmp_path / "a.bin", m)
    back = import_policy(tmp_path / "a.bin")
    h2 = export_policy(back, tmp_path / "b.bin", m)
    assert h1 == h2
    assert (tmp_path / "a.bin").read_bytes() == (tmp_path / "b.bin").read_bytes()
    for name in ("kind", "bid_level", "ask_level", "bid_lots", "ask_lots", "market_lots"):
        np.testing.assert_array_equal(getattr(back, name), getattr(pol, name))
    assert back.model_fingerprint == m.fingerprint()


def test_header_fields(solved):
    m, pol = solved
    data = policy_bytes(pol)
    head = json.loads(data[: data.index(b"\n")])
    assert head["model_fingerprint"] == m.fingerprint()
    assert head["tie_break_version"] == TIE_BREAK_VERSION
    assert tuple(head["dims"]) == pol.grid.shape
    assert head["scheme"]["step"] == 0.3
    assert len(data) == data.index(b"\n") + 1 + RECORD.itemsize * int(np.prod(pol.grid.shape))


def test_export_checks_model(solved):
    m, pol = solved
    with pytest.raises(ArtifactMismatch):
        policy_bytes(pol, m.with_(**{"fees.stamp_rate": 0.0}))


@pytest.mark.parametrize("mangle", [
    lambda d: d[:-1],
    lambda d: d.replace(b"mmqvi-policy", b"other-format", 1),
    lambda d: b"\xff\xfe" + d,
    lambda d: d.replace(b"\n", b" ", 1),
    lambda d: b"",
])
def test_corrupt_artifact_is_data_error(solved, mangle):
    with pytest.raises(DataError):
        policy_from_bytes(mangle(policy_bytes(solved[1])))


def test_wrong_tie_break_version_rejected(solved):
    data = policy_bytes(solved[1])
    nl = data.index(b"\n")
    head = json.loads(data[:nl])
    head["tie_break_version"] = "something-else"
    with pytest.raises(DataError, match="tie-break"):
        policy_from_bytes(json.dumps(head).encode() + data[nl:])
