"""Command-line entry point: calibrate, solve, backtest, sweep, validate.

Every command writes its outputs plus ``effective_config.json`` into the
output directory. Wall-clock times and timestamps go only to the sidecar
``run.log`` so the artifacts themselves are reproducible byte for byte.
"""
from __future__ import annotations

import argparse
import datetime as _dt
import json
import logging
import sys
import time
from pathlib import Path

from . import __version__
from .backtest import StrategySpec, metrics_csv, run_monte_carlo, terminal_csv
from .calibration import calibrate, read_quote_log_csv, read_snapshots_csv
from .config import RunConfig, load_config
from .errors import ArtifactMismatch, ConfigError, DataError, DomainError, ResourceError
from .model import validate_model
from .policy_io import export_policy, import_policy
from .scenario import changes_vs, curves_csv, long_csv, run_sweep, slice_csv
from .solver import solve_backward

EXIT_OK, EXIT_DATA, EXIT_RESOURCE, EXIT_MISMATCH = 0, 2, 3, 4

log = logging.getLogger("mmqvi")


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        fh.write(text)


def _echo_config(cfg: RunConfig, out: Path) -> None:
    _write(out / "effective_config.json", json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n")


def _setup_log(out: Path, command: str) -> logging.Handler:
    out.mkdir(parents=True, exist_ok=True)
    handler = logging.FileHandler(out / "run.log", mode="a", encoding="utf-8")
    handler.setFormatter(logging.Formatter("%(asctime)s %(levelname)s %(message)s"))
    log.addHandler(handler)
    log.setLevel(logging.INFO)
    log.info("command=%s version=%s started=%s", command, __version__, _dt.datetime.now().isoformat())
    return handler


def _solve(cfg: RunConfig, out: Path):
    t0 = time.perf_counter()
    _, policy = solve_backward(cfg.model, cfg.scheme, threads=cfg.threads)
    wall = time.perf_counter() - t0
    shape = "x".join(str(n) for n in policy.grid.shape)
    print(f"grid {shape} ({policy.grid.nbytes_estimate() / 2**20:.1f} MiB) solved in {wall:.2f} s")
    log.info("solve grid=%s wall=%.3fs", shape, wall)
    return policy


def cmd_calibrate(cfg: RunConfig, out: Path) -> int:
    cal = cfg.calibration
    if "snapshots" not in cal:
        raise ConfigError("calibrate needs --snapshots (or calibration.snapshots in the config)")
    series = read_snapshots_csv(cal["snapshots"])
    quotes = read_quote_log_csv(cal["quotes"]) if cal.get("quotes") else None
    report = calibrate(series, quotes, tick=float(cal.get("tick", cfg.model.tick)),
                       n_states=int(cal.get("max_spread_ticks", cfg.model.n_states)),
                       dt=float(cal.get("dt", 3.0)), base=cfg.model)
    _write(out / "model.json", json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    for note in report.notes:
        print(f"note: {note}")
    m = report.model
    print(f"jump rate {m.spread.jump_rate:.6g}/s, drift {m.midquote.drift:.6g}, vol {m.midquote.vol:.6g}")
    print(f"wrote {out / 'model.json'}")
    return EXIT_OK


def cmd_solve(cfg: RunConfig, out: Path) -> int:
    policy = _solve(cfg, out)
    path = Path(cfg.policy_path) if cfg.policy_path else out / "policy.bin"
    digest = export_policy(policy, path, cfg.model)
    print(f"wrote {path} sha256={digest}")
    return EXIT_OK


def cmd_backtest(cfg: RunConfig, out: Path) -> int:
    kinds = ("policy", "constant") if cfg.strategy == "both" else (cfg.strategy,)
    specs = []
    for kind in kinds:
        if kind == "policy":
            if cfg.policy_path and Path(cfg.policy_path).exists():
                pol = import_policy(cfg.policy_path)
            else:
                pol = _solve(cfg, out)
            specs.append(StrategySpec("policy", pol, allow_mismatch=cfg.allow_mismatch, name="optimal"))
        else:
            specs.append(StrategySpec("constant"))
    rows = []
    for spec in specs:
        t0 = time.perf_counter()
        res = run_monte_carlo(cfg.model, spec, cfg.backtest)
        log.info("backtest strategy=%s paths=%d wall=%.3fs", spec.label, cfg.backtest.n_paths,
                 time.perf_counter() - t0)
        rows.append(res.metrics.row(spec.label))
        if cfg.emit_terminal:
            _write(out / f"terminal_{spec.label}.csv", terminal_csv(res.terminal))
        for k, rec in enumerate(res.samples[:cfg.emit_paths]):
            _write(out / "paths" / f"{spec.label}_{k:04d}.csv", rec.csv())
        m = res.metrics
        ir = "null" if m.information_ratio is None else f"{m.information_ratio:.4f}"
        print(f"{spec.label:>8}: mean {m.mean_profit:.4f} std {m.std_profit:.4f} IR {ir} "
              f"volume {m.mean_total_volume:.1f}")
    _write(out / "metrics.csv", metrics_csv(rows))
    print(f"wrote {out / 'metrics.csv'}")
    return EXIT_OK


def cmd_sweep(cfg: RunConfig, out: Path) -> int:
    if cfg.sweep is None:
        raise ConfigError("sweep needs a 'sweep' section or --axis")
    spec = cfg.sweep
    policy = import_policy(cfg.policy_path) if cfg.policy_path and Path(cfg.policy_path).exists() else None
    res = run_sweep(spec, cfg.model, cfg.scheme, cfg.backtest, threads=cfg.threads, policy=policy)
    _write(out / f"sweep_{spec.axis}.csv", long_csv(res))
    _write(out / f"inventory_{spec.axis}.csv", curves_csv(res, cfg.backtest.step))
    if res.slices:
        _write(out / "policy_slices.csv", slice_csv(res))
    if spec.axis == "solver_sigma_mismatch" and cfg.model.midquote.vol in spec.values:
        ch = changes_vs(res, cfg.model.midquote.vol)
        for v, d in ch.items():
            print(f"sigma {v}: mean {d['mean_profit']:+.2%} std {d['std_profit']:+.2%} IR {d['information_ratio']:+.2%}")
    print(f"wrote {out / f'sweep_{spec.axis}.csv'} ({len(res.rows)} cells)")
    return EXIT_OK


def cmd_validate(cfg: RunConfig, out: Path) -> int:
    problems = validate_model(cfg.model)
    for p in problems:
        print(f"invalid: {p}")
    if problems:
        return EXIT_DATA
    g = cfg.scheme
    print(f"model ok (fingerprint {cfg.model.fingerprint()[:16]}); scheme T={g.horizon} h={g.step} eta={g.eta}")
    return EXIT_OK


COMMANDS = {
    "calibrate": cmd_calibrate,
    "solve": cmd_solve,
    "backtest": cmd_backtest,
    "sweep": cmd_sweep,
    "validate": cmd_validate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--seed", type=int, help="master seed (overrides config)")
    common.add_argument("--threads", type=int, help="worker threads")
    common.add_argument("--out-dir", dest="out_dir", help="output directory")
    common.add_argument("--model", dest="model_path", help="market model JSON (overrides the config's model)")

    p = argparse.ArgumentParser(prog="mmqvi", description="Optimal market making: calibrate, solve, backtest, sweep.",
                                parents=[common])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("calibrate", parents=[common], help="estimate a market model from CSV data")
    c.add_argument("--snapshots", help="CSV time_s,best_bid,best_ask")
    c.add_argument("--quotes", help="CSV time_s,side,level,spread_state,event")

    s = sub.add_parser("solve", parents=[common], help="solve the control problem and write a policy artifact")
    s.add_argument("--policy", dest="policy_path", help="artifact path (default OUT/policy.bin)")

    b = sub.add_parser("backtest", parents=[common], help="Monte Carlo backtest")
    b.add_argument("--strategy", choices=("policy", "constant", "both"))
    b.add_argument("--policy", dest="policy_path", help="policy artifact (solved in-process if absent)")
    b.add_argument("--n-paths", dest="n_paths", type=int)
    b.add_argument("--emit-paths", dest="emit_paths", type=int, help="write this many full path CSVs")
    b.add_argument("--allow-mismatch", dest="allow_mismatch", action="store_true", default=None)

    w = sub.add_parser("sweep", parents=[common], help="scenario sweep")
    w.add_argument("--axis", help="volatility | stamp_duty | drift | solver_sigma_mismatch")
    w.add_argument("--n-paths", dest="n_paths", type=int)
    w.add_argument("--policy", dest="policy_path", help="fixed policy for mismatch sweeps")

    sub.add_parser("validate", parents=[common], help="check a model/config without running")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config")}
    try:
        cfg = load_config(getattr(args, "config", None), flags)
    except (ConfigError, DataError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    out = Path(cfg.out_dir)
    handler = _setup_log(out, args.command)
    try:
        _echo_config(cfg, out)
        return COMMANDS[args.command](cfg, out)
    except (ConfigError, DataError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        log.error("%s", exc)
        return EXIT_DATA
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        log.error("%s", exc)
        return EXIT_RESOURCE
    except ArtifactMismatch as exc:
        print(f"error: {exc}", file=sys.stderr)
        log.error("%s", exc)
        return EXIT_MISMATCH
    finally:
        log.removeHandler(handler)
        handler.close()


if __name__ == "__main__":
    sys.exit(main())
