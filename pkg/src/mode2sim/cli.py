"""Command-line front end.

Subcommands:
  run       execute a preset or custom sweep and write a CSV dataset
  validate  check a config file and echo the normalized scenario
  presets   list available experiment presets

Exit codes: 0 success, 1 configuration error, 2 bracket or statistics failure.
Progress goes to stderr; data only to the --out file.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ProcessPoolExecutor

from . import configio, experiment
from .engine import BracketError, StatisticsError, run_simulation
from .grid import ConfigError

log = logging.getLogger("mode2sim")


def _parse_list(text: str, conv):
    return tuple(conv(part) for part in text.split(",") if part.strip())


def _parse_k(text: str) -> tuple[int, ...]:
    if "-" in text and "," not in text:
        lo, hi = text.split("-", 1)
        return tuple(range(int(lo), int(hi) + 1))
    return _parse_list(text, int)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mode2sim",
        description="Sidelink Mode 2 broadcast simulator for sporadic safety messages",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run an experiment and write a CSV dataset")
    run_p.add_argument("--preset", default="custom", choices=sorted(experiment.PRESETS))
    run_p.add_argument("--config", help="flat key=value scenario file applied to every cell")
    run_p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override a single scenario key (repeatable)")
    run_p.add_argument("--seeds", default="0,1,2,3,4", help="comma-separated run seeds")
    run_p.add_argument("--jobs", type=int, default=1, help="worker processes")
    run_p.add_argument("--out", required=True, help="output CSV path")
    run_p.add_argument("--algorithms", help="comma list: ra,srs,qfa")
    run_p.add_argument("--decoders", help="comma list: mppd,ipd")
    run_p.add_argument("--duplexes", help="comma list: hd,sbfd,ibfd")
    run_p.add_argument("--k", help="attempt counts, e.g. 2,5 or 1-8")
    run_p.add_argument("--loads", help="comma list of loads (packets/s per UE)")
    run_p.add_argument("--targets", help="comma list of PLR targets for capacity search")
    run_p.add_argument("--bracket", help="capacity bracket lo:hi")
    run_p.add_argument("--rel-tol", type=float, default=0.05,
                       help="relative capacity bisection tolerance")
    run_p.add_argument("--trace", help="write selection/reception trace lines (forces --jobs 1)")

    val_p = sub.add_parser("validate", help="validate a config file")
    val_p.add_argument("--config", required=True)

    sub.add_parser("presets", help="list experiment presets")
    return parser


def _cmd_validate(args) -> int:
    scenario, errors = configio.load_config(args.config)
    if errors:
        for err in errors:
            print(f"error: {err}", file=sys.stderr)
        return 1
    sys.stdout.write(configio.format_flat(configio.scenario_to_flat(scenario)))
    return 0


def _cmd_presets() -> int:
    for name in sorted(experiment.PRESETS):
        print(f"{name:15s} {experiment.PRESETS[name]}")
    return 0


def _cmd_run(args) -> int:
    overrides: dict = {}
    if args.config:
        scenario, errors = configio.load_config(args.config)
        if errors:
            for err in errors:
                print(f"error: {err}", file=sys.stderr)
            return 1
        overrides.update(configio.scenario_overrides(scenario))
    for item in args.set:
        if "=" not in item:
            print(f"error: --set expects KEY=VALUE, got {item!r}", file=sys.stderr)
            return 1
        key, value = item.split("=", 1)
        overrides[key.strip()] = value.strip()

    try:
        seeds = _parse_list(args.seeds, int)
        spec = experiment.make_preset(args.preset, seeds=seeds, overrides=overrides)
        if args.algorithms:
            spec.algorithms = _parse_list(args.algorithms, str)
            spec.combos = None
        if args.decoders:
            spec.decoders = _parse_list(args.decoders, str)
            spec.combos = None
        if args.duplexes:
            spec.duplexes = _parse_list(args.duplexes, str)
            spec.combos = None
        if args.k:
            spec.k_values = _parse_k(args.k)
        if args.loads:
            spec.loads = _parse_list(args.loads, float)
        if args.targets:
            spec.plr_targets = _parse_list(args.targets, float)
        if args.bracket:
            lo, hi = args.bracket.split(":", 1)
            spec.bracket = (float(lo), float(hi))
        spec.capacity_rel_tol = args.rel_tol
    except (ValueError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

    trace_fh = None
    run_mapper = map
    executor = None
    if args.trace:
        trace_fh = open(args.trace, "w")

        def run_mapper(fn, items):  # noqa: ARG001 - only _run_one cells reach here
            return [run_simulation(sc, seed, trace=trace_fh) for sc, seed in items]

    elif args.jobs > 1:
        executor = ProcessPoolExecutor(max_workers=args.jobs)
        run_mapper = executor.map

    try:
        rows, invalid = experiment.run_experiment(spec, run_mapper)
        experiment.write_csv(rows, spec, args.out)
        log.info("wrote %d rows to %s", len(rows), args.out)
        if invalid:
            print("invalid combinations were skipped:", file=sys.stderr)
            for note in invalid:
                print(f"  {note}", file=sys.stderr)
            return 1
        return 0
    except (BracketError, StatisticsError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        if executor is not None:
            executor.shutdown()
        if trace_fh is not None:
            trace_fh.close()


def main(argv=None) -> int:
    logging.basicConfig(
        stream=sys.stderr, level=logging.INFO, format="%(levelname)s %(message)s"
    )
    args = _build_parser().parse_args(argv)
    if args.command == "validate":
        return _cmd_validate(args)
    if args.command == "presets":
        return _cmd_presets()
    return _cmd_run(args)


if __name__ == "__main__":
    sys.exit(main())
