from __future__ import annotations

import sys
import warnings
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mmqvi.model import (  # noqa: E402
    REFERENCE_TRANSITION,
    FeeSchedule,
    MarketModel,
    MidQuoteModel,
    OrderBounds,
    SpreadModel,
    parametric_fill_model,
)

ROOT = Path(__file__).resolve().parents[1]


def small_model(m: int = 3, *, p0=1.0, drift=0.0, vol=0.01, eps=0.0, rho=0.0, jump=1.0,
                bounds=(1, 1, 1, -2, 2), scale=0.4, decay=1.2) -> MarketModel:
    """Few-lot model on a unit lot, cheap enough for exhaustive checks."""
    if m == 1:
        tr = [[1.0]]
    elif m == 2:
        tr = [[0.0, 1.0], [1.0, 0.0]]
    else:
        tr = REFERENCE_TRANSITION
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        spread = SpreadModel(m, 0.01, jump, tr)
    return MarketModel(FeeSchedule(0.01, eps, rho), MidQuoteModel(p0, drift, vol), spread,
                       parametric_fill_model(scale, decay, m), OrderBounds(*bounds))


@pytest.fixture
def tiny():
    return small_model()


def pytest_terminal_summary(terminalreporter):
    import acceptance_report

    if acceptance_report.LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(acceptance_report.LINES):
            terminalreporter.write_line(acceptance_report.LINES[k])
