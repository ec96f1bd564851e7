"""Command-line interface.

Subcommands: run, sweep-mesh, compare-norms, plot.  Each run writes its
per-iteration CSV, JSON metadata, and convergence figures (SVG + PNG) into
the --out directory.  Exit codes: 0 converged / all ok, 2 max_iters reached,
3 diverged, 64 configuration error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from . import experiments, plots
from .experiments import (
    EXIT_CONFIG,
    ConfigError,
    RunConfig,
    compare_norms,
    read_csv,
    run,
    sweep_mesh,
    write_combined_csv,
    write_csv,
    write_json,
)


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--re", type=float, default=1000.0, help="Reynolds number (nu = 1/Re)")
    p.add_argument("--nx", type=int, default=64, help="cells per side")
    p.add_argument(
        "--m",
        default="0",
        help="window depth: integer, 'inf', or schedule 'a:tol:b'",
    )
    p.add_argument("--norm", choices=["vprime", "l2"], default="vprime")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iters", type=int, default=100)
    p.add_argument("--mode", choices=["picard", "ngmres"], default="ngmres")
    p.add_argument("--out", type=Path, default=None, help="output directory")
    p.add_argument(
        "--timings",
        action="store_true",
        help="record wall times in the CSV (breaks byte-for-byte reproducibility)",
    )


def _config(args) -> RunConfig:
    cfg = RunConfig(
        re=args.re,
        nx=args.nx,
        m=args.m,
        norm=args.norm,
        tol=args.tol,
        max_iters=args.max_iters,
        mode=args.mode,
        timings=args.timings,
    )
    cfg.validate()
    return cfg


def _report(logs, outdir, labels=None, combined=None):
    """Write figures (and optionally a combined CSV) alongside the run CSVs."""
    if outdir is None:
        return
    outdir = Path(outdir)
    plots.emit_plot(logs, outdir / "convergence.svg", labels=labels)
    plots.render_png(logs, outdir / "convergence.png", labels=labels)
    if combined is not None:
        key, values, name = combined
        write_combined_csv(logs, outdir / name, key, values)


def _cmd_run(args) -> int:
    cfg = _config(args)
    log = run(cfg)
    if args.out is not None:
        write_csv(log, args.out / "run.csv")
        write_json(log, args.out / "run.json")
        _report([log], args.out)
    print(f"{log.status}: {log.iterations} iterations, final residual "
          f"{log.records[-1].g_vprime:.3e}")
    return log.exit_code


def _cmd_sweep(args) -> int:
    cfg = _config(args)
    sizes = [int(s) for s in args.sizes.split(",") if s]
    logs = sweep_mesh(cfg, sizes)
    if args.out is not None:
        for log in logs:
            write_csv(log, args.out / f"run_nx{log.config.nx}.csv")
            write_json(log, args.out / f"run_nx{log.config.nx}.json")
        if logs:
            _report(
                logs,
                args.out,
                combined=("nx", [log.config.nx for log in logs], "sweep.csv"),
            )
    for log in logs:
        print(f"nx={log.config.nx}: {log.status} in {log.iterations} iterations")
    if not logs:
        return EXIT_CONFIG if sizes else 0
    return max(log.exit_code for log in logs)


def _cmd_compare(args) -> int:
    cfg = _config(args)
    log_v, log_l = compare_norms(cfg)
    if args.out is not None:
        write_csv(log_v, args.out / "run_vprime.csv")
        write_csv(log_l, args.out / "run_l2.csv")
        write_json(log_v, args.out / "run_vprime.json")
        write_json(log_l, args.out / "run_l2.json")
        _report(
            [log_v, log_l],
            args.out,
            combined=("norm", ["vprime", "l2"], "compare.csv"),
        )
    for log in (log_v, log_l):
        print(f"norm={log.config.norm}: {log.status} in {log.iterations} iterations")
    return max(log_v.exit_code, log_l.exit_code)


def _cmd_plot(args) -> int:
    logs = [read_csv(p) for p in args.csvs]
    labels = args.labels.split(",") if args.labels else [str(p) for p in args.csvs]
    plots.emit_plot(logs, args.out, theta_overlay=args.theta_overlay, labels=labels)
    png = Path(args.out).with_suffix(".png")
    plots.render_png(logs, png, labels=labels)
    print(f"wrote {args.out} and {png}")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ngmres-flow",
        description="NGMRES-accelerated Picard iteration for the 2D lid-driven cavity",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="single run")
    _add_run_flags(p)
    p.set_defaults(fn=_cmd_run)

    p = sub.add_parser("sweep-mesh", help="rerun one config across grid sizes")
    _add_run_flags(p)
    p.add_argument("--sizes", required=True, help="comma list, e.g. 32,64,128")
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("compare-norms", help="paired runs with vprime and l2 norms")
    _add_run_flags(p)
    p.set_defaults(fn=_cmd_compare)

    p = sub.add_parser("plot", help="plot convergence curves from run CSVs")
    p.add_argument("csvs", nargs="+", type=Path)
    p.add_argument("--out", type=Path, required=True, help="output SVG path")
    p.add_argument("--labels", default=None, help="comma list of legend labels")
    p.add_argument("--theta-overlay", action="store_true")
    p.set_defaults(fn=_cmd_plot)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
