"""Command-line interface.

Subcommands: simulate (run a config, write CSV), sweep (grid of runs),
resonances (print the catalog for a config's parameters), compare
(simulate with analytic columns and deviation summary forced on).

Exit codes: 0 success, 1 usage/config error, 2 physics-validity or health
warning, 3 numerical-health failure.
"""

import argparse
import sys
from dataclasses import replace

from . import __version__
from .config import ConfigError, RunSpec, SweepSpec, parse_config
from .evolve import EvolverError
from .harness import EXIT_HEALTH, EXIT_USAGE, list_resonances, run, sweep


def _build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="dceqed",
        description="Photon generation in a modulated cavity with two atoms",
    )
    p.add_argument("--version", action="version", version=f"dceqed {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, help_ in (
        ("simulate", "integrate one configuration and write a CSV"),
        ("sweep", "run a parameter grid and collect final-time observables"),
        ("resonances", "list the resonance catalog for the configured model"),
        ("compare", "simulate with analytic columns and deviation summary"),
    ):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("config", help="TOML configuration file")
        sp.add_argument("--out", help="output CSV path (overrides config)")
        sp.add_argument("--n-max", type=int, help="Fock truncation override")
        sp.add_argument("--dt", type=float, help="time step override")
        sp.add_argument("--strict", action="store_true",
                        help="reject unknown configuration keys")
    return p


def _apply_overrides(spec, args):
    if isinstance(spec, SweepSpec):
        spec.base = _apply_overrides(spec.base, args)
        return spec
    if args.n_max is not None:
        spec = replace(spec, n_max=args.n_max)
    if args.dt is not None:
        spec = replace(spec, evolver=spec.evolver.replace(dt=args.dt))
    if args.out is not None:
        spec = replace(spec, out=args.out)
    return spec


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        spec = parse_config(args.config, strict=args.strict)
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        spec = _apply_overrides(spec, args)

        if args.command == "resonances":
            base = spec.base if isinstance(spec, SweepSpec) else spec
            text = list_resonances(base.params, out=base.out)
            print(text, end="")
            return 0

        if args.command == "sweep":
            if not isinstance(spec, SweepSpec):
                print("error: config has no [sweep] section", file=sys.stderr)
                return EXIT_USAGE
            result = sweep(spec)
        else:
            if isinstance(spec, SweepSpec):
                spec = spec.base
            if args.command == "compare":
                spec = replace(spec, comparison="both")
            result = run(spec)
            dev = result.summary.get("max_rel_deviation_mean_n", ...)
            if dev is not ...:
                shown = "n/a" if dev is None else f"{dev:.4g}"
                print(f"max relative deviation of mean_n (analytic vs numeric): {shown}")
        if result.spec.out is None and args.out is None:
            print(result.csv_text, end="")
        for key in ("regime", "regime_verdict", "samples", "points"):
            if key in result.summary:
                print(f"{key}: {result.summary[key]}", file=sys.stderr)
        return result.exit_code
    except ConfigError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except EvolverError as e:
        print(f"numerical-health failure: {e}", file=sys.stderr)
        return EXIT_HEALTH


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
