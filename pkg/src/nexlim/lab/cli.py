"""Command-line entry point ``nexlim``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .. import _accel
from ..errors import ConfigError, NexlimError
from . import results as emit
from .config import load_config, preset_config
from .presets import PRESETS
from .runner import (consistency_suite, conservation_checks, convergence_sweep, fit_rate,
                     metric_checks, run_scenario)

EXIT_OK, EXIT_CONFIG, EXIT_SOLVER, EXIT_CHECK = 0, 2, 3, 4


def _config(arg):
    """A TOML path, or a shipped preset name when no such file exists."""
    if not Path(arg).exists() and arg in PRESETS:
        return preset_config(arg)
    return load_config(arg)


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError as exc:
        raise ConfigError(f"--ns: expected comma-separated integers, got {text!r}") from exc


def cmd_run(args):
    cfg = _config(args.config)
    summary = run_scenario(cfg, args.out)
    out = args.out or cfg.out_dir
    print(f"{cfg.name}: N={summary['N']} spread {summary['initial_spread']:.6g} -> "
          f"{summary['terminal_spread']:.6g} in {summary['runtime_s']:.2f}s; wrote {out}")
    return EXIT_OK


def cmd_sweep(args):
    cfg = _config(args.config)
    ns = _ints(args.ns) if args.ns else None
    res = convergence_sweep(cfg, ns=ns, seeds=args.seeds)
    out = Path(args.out or cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    emit.emit(res, "csv", out / "sweep.csv")
    emit.emit(res, "json", out / "sweep.json")
    for N, med in zip(res.ns(), res.medians()):
        print(f"N={N:6d}  {res.metric} error {med:.6e}")
    if res.slope is not None:
        print(f"slope {res.slope:.4f}  intercept {res.intercept:.4f}  residual {res.residual:.3g}")
    print(f"wrote {out / 'sweep.csv'}")
    return EXIT_OK


def _report(rows):
    ok = True
    for name, status, dev, thr, reason in rows:
        ok &= status != "fail"
        d = "-" if dev is None else f"{dev:.3e}"
        print(f"{name:<16} {status:<8} deviation {d:<10} threshold {thr:.1e} {reason}")
    return EXIT_OK if ok else EXIT_CHECK


def cmd_check(args):
    if args.suite == "metrics":
        res = metric_checks()
        return _report([(k, "pass" if d <= t else "fail", d, t, "") for k, (d, t) in res.items()])
    cfg = _config(args.config)
    if args.suite == "arrows":
        return _report([(f"arrow {c.arrow}", c.status, c.deviation, c.threshold, c.reason)
                        for c in consistency_suite(cfg)])
    res = conservation_checks(cfg)
    return _report([(k, "pass" if d <= t else "fail", d, t, "") for k, (d, t) in res.items()])


def cmd_rate(args):
    N, _, err = emit.load_sweep_csv(args.inp)
    ns = sorted(set(N.tolist()))
    med = [float(np.median(err[N == n])) for n in ns]
    slope, intercept, resid = fit_rate(ns, med)
    print(f"slope {slope:.6f}  intercept {intercept:.6f}  residual {resid:.3g}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(prog="nexlim", description="Non-exchangeable particle systems lab")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one scenario and write CSV/JSON artifacts")
    r.add_argument("--config", required=True, help="TOML file or preset name")
    r.add_argument("--out", help="output directory")
    r.set_defaults(func=cmd_run)
    s = sub.add_parser("sweep", help="convergence sweep over N")
    s.add_argument("--config", required=True)
    s.add_argument("--ns", help="comma-separated N list, e.g. 25,50,100")
    s.add_argument("--seeds", type=int, help="number of seeds for random graphs")
    s.add_argument("--out")
    s.set_defaults(func=cmd_sweep)
    c = sub.add_parser("check", help="cross-limit, metric or conservation checks")
    c.add_argument("--suite", choices=["arrows", "metrics", "conservation"], required=True)
    c.add_argument("--config", help="TOML file or preset name (not needed for metrics)")
    c.set_defaults(func=cmd_check)
    t = sub.add_parser("rate", help="fit a log-log rate to a sweep CSV")
    t.add_argument("--in", dest="inp", required=True)
    t.set_defaults(func=cmd_rate)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    _accel.set_threads_from_env()
    if args.command == "check" and args.suite != "metrics" and not args.config:
        print("nexlim: --config is required for this suite", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"nexlim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NexlimError as exc:
        print(f"nexlim: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
