"""Run configuration: one JSON document, optionally extending another.

Precedence, lowest first: built-in defaults, the ``extends`` chain, the
document itself, command-line flags. Relative paths are resolved against the
directory of the document that names them.
"""
from __future__ import annotations

import copy
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

from .backtest import BacktestParams
from .errors import ConfigError
from .model import MarketModel, baseline_model
from .scenario import DEFAULT_VALUES, SweepSpec
from .solver import SchemeParams

PATH_KEYS = (("calibration", "snapshots"), ("calibration", "quotes"), ("policy_path",), ("model_path",))
STRATEGIES = ("policy", "constant", "both")


def deep_merge(base: dict, top: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in top.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = deep_merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _resolve_paths(doc: dict, root: Path) -> dict:
    doc = copy.deepcopy(doc)
    for keys in PATH_KEYS:
        node = doc
        for k in keys[:-1]:
            node = node.get(k) if isinstance(node, dict) else None
            if node is None:
                break
        if isinstance(node, dict) and isinstance(node.get(keys[-1]), str):
            p = Path(node[keys[-1]])
            node[keys[-1]] = str(p if p.is_absolute() else (root / p).resolve())
    return doc


def read_document(path, _seen: frozenset = frozenset()) -> dict:
    p = Path(path).resolve()
    if p in _seen:
        raise ConfigError(f"circular 'extends' chain at {p}")
    if not p.exists():
        raise ConfigError(f"config file {p} does not exist")
    try:
        doc = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{p}: invalid JSON ({exc})") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{p}: top level must be an object")
    doc = _resolve_paths(doc, p.parent)
    parent = doc.pop("extends", None)
    if parent is not None:
        pp = Path(parent)
        pp = pp if pp.is_absolute() else p.parent / pp
        doc = deep_merge(read_document(pp, _seen | {p}), doc)
    return doc


@dataclass
class RunConfig:
    model: MarketModel
    scheme: SchemeParams
    backtest: BacktestParams
    strategy: str = "both"
    allow_mismatch: bool = False
    emit_paths: int = 0
    emit_terminal: bool = True
    policy_path: str | None = None
    calibration: dict = field(default_factory=dict)
    sweep: SweepSpec | None = None
    threads: int = 1
    out_dir: str = "out"

    def to_dict(self) -> dict[str, Any]:
        """Fully resolved document; loading it reproduces the run."""
        doc = {
            "model": self.model.to_dict(),
            "scheme": self.scheme.to_dict(),
            "backtest": {
                "horizon": self.backtest.horizon, "step": self.backtest.step,
                "n_paths": self.backtest.n_paths, "seed": self.backtest.seed,
                "n_sample_paths": self.backtest.n_sample_paths, "chunk_size": self.backtest.chunk_size,
                "strategy": self.strategy, "allow_mismatch": self.allow_mismatch,
                "emit_paths": self.emit_paths, "emit_terminal": self.emit_terminal,
            },
            "calibration": dict(self.calibration),
            "threads": self.threads,
            "out_dir": self.out_dir,
        }
        if self.policy_path is not None:
            doc["policy_path"] = self.policy_path
        if self.sweep is not None:
            s = asdict(self.sweep)
            s["values"] = list(s["values"])
            if s["sigmas"] is not None:
                s["sigmas"] = list(s["sigmas"])
            doc["sweep"] = s
        return doc


def _take(section: dict, name: str, allowed: set) -> dict:
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in '{name}': {', '.join(sorted(unknown))}")
    return section


def build_config(doc: dict, flags: dict | None = None) -> RunConfig:
    """Type-check a merged document and apply flag overrides (``None`` flags are ignored)."""
    flags = {k: v for k, v in (flags or {}).items() if v is not None}
    doc = copy.deepcopy(doc)
    known = {"model", "model_path", "scheme", "backtest", "calibration", "sweep", "policy_path",
             "threads", "seed", "out_dir", "description"}
    _take(doc, "top level", known)

    if "model_path" in flags:
        doc["model_path"] = str(Path(flags["model_path"]).resolve())
        doc.pop("model", None)
    if "model_path" in doc:
        mp = Path(doc["model_path"])
        if not mp.exists():
            raise ConfigError(f"model file {mp} does not exist")
        try:
            mdoc = json.loads(mp.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{mp}: invalid JSON ({exc})") from None
        mdoc.pop("report", None)
        model = MarketModel.from_dict(mdoc)
    elif "model" in doc:
        model = MarketModel.from_dict(doc["model"])
    else:
        model = baseline_model()

    sch = dict(doc.get("scheme", {}))
    try:
        scheme = SchemeParams(**sch)
    except TypeError as exc:
        raise ConfigError(f"bad 'scheme' section: {exc}") from None

    bt = dict(doc.get("backtest", {}))
    _take(bt, "backtest", {"horizon", "step", "n_paths", "seed", "n_sample_paths", "chunk_size", "strategy",
                           "allow_mismatch", "emit_paths", "emit_terminal"})
    seed = flags.get("seed", bt.get("seed", doc.get("seed", 20190829)))
    threads = int(flags.get("threads", doc.get("threads", 1)))
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    strategy = flags.get("strategy", bt.get("strategy", "both"))
    if strategy not in STRATEGIES:
        raise ConfigError(f"strategy must be one of {', '.join(STRATEGIES)}")
    emit_paths = int(flags.get("emit_paths", bt.get("emit_paths", 0)))
    backtest = BacktestParams(
        horizon=float(bt.get("horizon", scheme.horizon)),
        step=float(bt.get("step", scheme.step)),
        n_paths=int(flags.get("n_paths", bt.get("n_paths", 10_000))),
        seed=int(seed),
        n_sample_paths=max(int(bt.get("n_sample_paths", 10)), emit_paths),
        threads=threads,
        chunk_size=int(bt.get("chunk_size", 1000)),
    )
    if backtest.n_paths < 1:
        raise ConfigError("n_paths must be >= 1")

    sweep = None
    if "sweep" in doc or "axis" in flags:
        sw = dict(doc.get("sweep", {}))
        _take(sw, "sweep", {"axis", "values", "resolve_policy", "n_paths", "seed", "sigmas"})
        axis = flags.get("axis", sw.get("axis"))
        if axis is None:
            raise ConfigError("sweep section needs an 'axis'")
        if "axis" in flags and flags["axis"] != sw.get("axis"):
            sw.pop("values", None)
        values = sw.get("values", DEFAULT_VALUES.get(axis, ()))
        sweep = SweepSpec(
            axis=axis,
            values=tuple(values),
            resolve_policy=bool(sw.get("resolve_policy", axis != "solver_sigma_mismatch")),
            n_paths=int(flags.get("n_paths", sw.get("n_paths", backtest.n_paths))),
            seed=int(flags.get("seed", sw.get("seed", backtest.seed))),
            sigmas=tuple(sw["sigmas"]) if sw.get("sigmas") is not None else None,
        )

    cal = dict(doc.get("calibration", {}))
    _take(cal, "calibration", {"snapshots", "quotes", "dt", "max_spread_ticks", "tick"})
    for key in ("snapshots", "quotes"):
        if key in flags:
            cal[key] = str(Path(flags[key]).resolve())

    policy_path = flags.get("policy_path", doc.get("policy_path"))
    if policy_path is not None:
        policy_path = str(Path(policy_path).resolve())
    return RunConfig(
        model=model,
        scheme=scheme,
        backtest=backtest,
        strategy=strategy,
        allow_mismatch=bool(flags.get("allow_mismatch", bt.get("allow_mismatch", False))),
        emit_paths=emit_paths,
        emit_terminal=bool(bt.get("emit_terminal", True)),
        policy_path=policy_path,
        calibration=cal,
        sweep=sweep,
        threads=threads,
        out_dir=str(flags.get("out_dir", doc.get("out_dir", "out"))),
    )


def load_config(path=None, flags: dict | None = None) -> RunConfig:
    doc = read_document(path) if path is not None else {}
    return build_config(doc, flags)
