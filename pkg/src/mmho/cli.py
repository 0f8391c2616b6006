"""Command-line entry point: ``mmho fig3|fig4|fig5|validate|single-run``."""

from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .config import echo_config, load_config
from .errors import ConfigError, DomainError, NumericError
from .harness import FIGURES

EXIT_OK, EXIT_IO, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="key = value config file")
    common.add_argument("--seed", type=int, help="override experiment.seed")
    common.add_argument("--trials", type=int, help="override experiment.trials")
    common.add_argument("--out", metavar="PATH", help="write output here instead of stdout")
    common.add_argument("--mode", choices=("analysis", "simulation", "compare"),
                        help="override experiment.mode")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    parser = argparse.ArgumentParser(prog="mmho", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in FIGURES:
        sub.add_parser(name, parents=[common], help=f"run the {name} sweep and write CSV")
    sub.add_parser("validate", parents=[common], help="check a config and echo resolved values")
    single = sub.add_parser("single-run", parents=[common], help="simulate one trial")
    single.add_argument("--speed-kmh", type=float, help="MUE speed (default: fastest swept)")
    single.add_argument("--no-caching", action="store_true", help="disable caching")
    single.add_argument("--trace", action="store_true", help="emit one line per event")
    return parser


def _config(args):
    cfg = load_config(args.config)
    overrides = {}
    if args.seed is not None:
        overrides["experiment__seed"] = args.seed
    if args.trials is not None:
        overrides["experiment__trials"] = args.trials
    if args.mode is not None:
        overrides["experiment__mode"] = args.mode
    return cfg.replace(**overrides) if overrides else cfg


def _single_run(cfg, args) -> str:
    from .sim.engine import Simulation

    speed = cfg.speeds[-1] if args.speed_kmh is None else args.speed_kmh / 3.6
    sim = Simulation(cfg.sim_config(speed), [cfg.seed], caching=[not args.no_caching],
                     trace=args.trace)
    res = sim.run()[0]
    lines = [f"# seed={cfg.seed}", f"# config_hash={cfg.digest()}", f"# version={__version__}"]
    if args.trace:
        lines.append("# time mue kind cell value")
        lines += [e.line() for e in sim.events]
    lines += [
        f"ho_count={res.ho_count}", f"attempts={res.attempts}", f"hof_count={res.hof_count}",
        f"hof_rate={res.hof_rate:.12g}", f"censored={res.censored}",
        f"cache_fills={len(res.cache_fill_samples)}",
    ]
    return "\n".join(lines) + "\n"


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config(args)
        if args.command == "validate":
            text = echo_config(cfg) + "\n"
        elif args.command == "single-run":
            text = _single_run(cfg, args)
        else:
            text = FIGURES[args.command](cfg).to_csv()
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except DomainError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericError, FloatingPointError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    try:
        if args.out:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK
