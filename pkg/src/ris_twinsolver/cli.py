"""Command line interface: ``ris-twinsolver run | validate | scenario print``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .channel import Engine
from .config import RunConfig, dump_scenario, read_run_config
from .core import build_reference_scenario
from .exceptions import TwinSolverError
from .runner import REFERENCE_SIZES, ExperimentSpec, format_report, run_experiment

ENGINE_CHOICES = {
    "analytical": (Engine.ANALYTICAL,),
    "peec": (Engine.PEEC,),
    "both": (Engine.ANALYTICAL, Engine.PEEC),
}


def _sizes(values) -> tuple[int, ...]:
    out = []
    for value in values:
        for part in str(value).split(","):
            if part.strip():
                try:
                    out.append(int(part))
                except ValueError:
                    raise argparse.ArgumentTypeError(f"invalid RIS size {part!r}") from None
    return tuple(out)


def _common(p: argparse.ArgumentParser, optimize_default: bool):
    p.add_argument("--config", type=Path, help="run configuration file (YAML or JSON)")
    p.add_argument("--sizes", nargs="+", metavar="N",
                   help="RIS sizes, space or comma separated (default 4 16 64)")
    p.add_argument("--seed", type=int, help="seed for the random coordinate order")
    p.add_argument("--out-dir", type=Path, default=Path("results"),
                   help="output directory (default ./results)")
    p.add_argument("--optimize", action=argparse.BooleanOptionalAction, default=optimize_default,
                   help="also run the termination optimizer")
    p.add_argument("-v", "--verbose", action="count", default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ris-twinsolver",
        description="RIS channel simulator with an analytical and a PEEC engine.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write CSV results")
    _common(run, optimize_default=False)
    run.add_argument("--engine", choices=sorted(ENGINE_CHOICES), default="both")
    run.add_argument("--timing", action="store_true",
                     help="fill the runtime_ms column (makes the CSV non-reproducible)")

    val = sub.add_parser("validate", help="run both engines and evaluate the cross-engine gates")
    _common(val, optimize_default=True)

    scen = sub.add_parser("scenario", help="scenario utilities")
    scen_sub = scen.add_subparsers(dest="scenario_command", required=True)
    show = scen_sub.add_parser("print", help="print the scenario as YAML")
    show.add_argument("--config", type=Path,
                      help="print the scenario of this run configuration instead")
    show.add_argument("--sizes", nargs="+", metavar="N",
                      help="RIS size of the built-in scenario (default 4)")
    return parser


def _spec(args, cfg: RunConfig, engines, write_results=True) -> ExperimentSpec:
    sizes = _sizes(args.sizes) if args.sizes else ()
    if cfg.scenario is None and not sizes:
        sizes = REFERENCE_SIZES
    optimizer = cfg.optimizer
    if args.seed is not None:
        optimizer = dataclasses.replace(optimizer, seed=args.seed)
    return ExperimentSpec(
        out_dir=args.out_dir, ris_sizes=sizes, engines=engines, optimize=args.optimize,
        scenario=cfg.scenario, quad=cfg.quad, mesh=cfg.mesh, optimizer=optimizer,
        ztg_form=cfg.ztg_form, timing=getattr(args, "timing", False),
        write_results=write_results)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(getattr(args, "verbose", 0), 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = read_run_config(args.config) if args.config else RunConfig()
        if args.command == "scenario":
            if cfg.scenario is not None and not args.sizes:
                scenario = cfg.scenario
            else:
                sizes = _sizes(args.sizes) if args.sizes else (4,)
                if len(sizes) != 1:
                    parser.error("scenario print takes a single size")
                scenario = build_reference_scenario(sizes[0], cfg.optimizer.initial_termination)
            sys.stdout.write(dump_scenario(scenario))
            return 0
        if args.command == "validate":
            spec = _spec(args, cfg, ENGINE_CHOICES["both"], write_results=False)
        else:
            spec = _spec(args, cfg, ENGINE_CHOICES[args.engine])
        report = run_experiment(spec)
    except (TwinSolverError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(format_report(report))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
