"""Collects one pass/fail line per acceptance criterion."""
from __future__ import annotations

LINES: dict[int, str] = {}


def record(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] C{number} {title}: {detail}"
    LINES[number] = line
    print(line, flush=True)
