"""Command-line interface: static checks, simulation and the scenario catalog."""
from __future__ import annotations

import argparse
import sys

from . import catalog
from .report import to_machine, to_text
from .runner import RunOptions, default_simulations, run_scenario
from .scenario import ScenarioError, load_scenario

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--format", choices=("text", "machine"), default="text",
                        help="human-readable text or versioned JSON")
    common.add_argument("--resolution", type=int, default=64,
                        help="lattice resolution for routing in 3+1 dimensions")

    parser = argparse.ArgumentParser(prog="minkowski-tasks",
                                     description="Analyse and simulate relativistic quantum tasks.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", parents=[common], help="run the static analyses of a scenario file")
    p.add_argument("file")

    p = sub.add_parser("simulate", parents=[common], help="simulate the strategies of a scenario file")
    p.add_argument("file")
    p.add_argument("--mode", choices=("exact", "mc"), default=None)
    p.add_argument("--trials", type=int, default=None)
    p.add_argument("--seed", type=int, default=None)

    p = sub.add_parser("catalog", parents=[common], help="run built-in scenarios")
    p.add_argument("name", nargs="?", default="all")
    p.add_argument("--list", action="store_true", help="list scenario names and exit")
    p.add_argument("--show", action="store_true", help="print the scenario source and exit")
    return parser


def _emit(reports, fmt: str) -> None:
    sys.stdout.write(to_machine(reports) if fmt == "machine" else to_text(reports))


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    if args.resolution <= 0:
        print("error: --resolution must be positive", file=sys.stderr)
        return EXIT_USAGE
    try:
        if args.command == "catalog":
            if args.list:
                print("\n".join(catalog.NAMES))
                return EXIT_OK
            if args.show:
                sys.stdout.write(catalog.source(args.name))
                return EXIT_OK
            reports = catalog.run_catalog(args.name, RunOptions(resolution=args.resolution))
        else:
            scn = load_scenario(args.file)
            if args.command == "check":
                reports = [run_scenario(scn, RunOptions(resolution=args.resolution, static_only=True))]
            else:
                if args.trials is not None and args.trials <= 0:
                    print("error: --trials must be positive", file=sys.stderr)
                    return EXIT_USAGE
                opts = RunOptions(args.mode, args.trials, args.seed, args.resolution, dynamic_only=True)
                if any(d.kind == "simulate" for d in scn.directives):
                    reports = [run_scenario(scn, opts)]
                else:
                    reports = [default_simulations(scn, opts)]
    except ScenarioError as exc:
        print(f"{getattr(args, 'file', args.command)}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KeyError as exc:
        print(f"error: {exc.args[0]}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit(reports, args.format)
    return EXIT_OK if all(r.ok for r in reports) else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
