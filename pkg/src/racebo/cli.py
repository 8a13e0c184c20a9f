"""Command line interface: run experiments, re-aggregate results, record
demonstrations.

    racebo run [config] [--method cdbo --kernels 50 --laps 300 ...] --out DIR
    racebo aggregate RECORDS_DIR [--out DIR]
    racebo demo TRACK [--target 15] --out FILE
"""

from __future__ import annotations

import argparse
import os
import sys

# experiment matrices are small; threaded BLAS only adds synchronisation cost
os.environ.setdefault("OPENBLAS_NUM_THREADS", "1")
os.environ.setdefault("OMP_NUM_THREADS", "1")

from .harness import (
    ConfigError,
    aggregate_directory,
    load_config,
    run_and_emit,
)
from .policy import save_demonstration
from .racesim import CarParams, DemonstrationError, TrackFormatError, demo_controller


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="racebo")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a configured experiment")
    run.add_argument("config", nargs="?", default=None, help="key=value config file")
    run.add_argument("--out", default="results", help="output directory")
    run.add_argument("--track")
    run.add_argument("--method")
    run.add_argument("--kernels", type=int)
    run.add_argument("--laps", type=int)
    run.add_argument("--warm-starts", dest="warm_starts", type=int)
    run.add_argument("--repeats", type=int)
    run.add_argument("--seeds", help="comma-separated seed list")
    run.add_argument("--beta", type=float)
    run.add_argument("--sigma0", type=float)
    run.add_argument("--sigma0-rel", dest="sigma0_rel", type=float)
    run.add_argument("--lambda-ridge", dest="lambda_ridge", type=float)
    run.add_argument("--af-budget", dest="af_budget", type=int)
    run.add_argument("--adapt-every", dest="adapt_every", type=int)
    run.add_argument("--v-target", dest="v_target", type=float)
    run.add_argument("--demo-stride", dest="demo_stride", type=int)

    agg = sub.add_parser("aggregate", help="rebuild curves from run CSVs")
    agg.add_argument("records_dir")
    agg.add_argument("--out", default=None)

    demo = sub.add_parser("demo", help="write a demonstration file for a track")
    demo.add_argument("track", help="builtin track name or track file path")
    demo.add_argument("--target", type=float, default=15.0, help="hold speed, m/s")
    demo.add_argument("--stride", type=int, default=1, help="record every k-th step")
    demo.add_argument("--out", default="demo.txt")
    return parser


def _cmd_run(args) -> int:
    overrides = {
        key: getattr(args, key)
        for key in ("track", "method", "kernels", "laps", "warm_starts", "repeats",
                    "beta", "sigma0", "sigma0_rel", "lambda_ridge", "af_budget",
                    "adapt_every", "v_target", "demo_stride")
    }
    if args.seeds is not None:
        overrides["seeds"] = tuple(int(s) for s in args.seeds.replace(",", " ").split())
    config = load_config(args.config, overrides)
    written = run_and_emit(config, args.out)
    for path in written:
        print(path)
    return 0


def _cmd_aggregate(args) -> int:
    for path in aggregate_directory(args.records_dir, args.out):
        print(path)
    return 0


def _cmd_demo(args) -> int:
    from .harness import resolve_track

    track = resolve_track(args.track)
    demo = demo_controller(track, CarParams(), args.target, sample_stride=args.stride)
    save_demonstration(demo, args.out)
    print(args.out)
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "aggregate":
            return _cmd_aggregate(args)
        return _cmd_demo(args)
    except (ConfigError, TrackFormatError, DemonstrationError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
