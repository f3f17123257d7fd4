"""Command-line entry point: ``similab run|list|check``.

Exit codes: 0 success, 2 configuration error, 3 run-time abort (including
a failed ``check``).
"""

from __future__ import annotations

import argparse
import logging
import sys

from .experiments import REGISTRY, ConfigError, RuntimeAbort, load_config, run

log = logging.getLogger("similab")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="similab", description="Stochastic similarity-variable simulations.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment from a TOML config")
    r.add_argument("config", help="path to the TOML configuration")
    r.add_argument("--seed", type=int, help="override the seed")
    r.add_argument("--out", help="override the output directory")
    r.add_argument("--paths", type=int, help="override the number of paths")
    r.add_argument("--threads", type=int, help="override the worker thread count")

    sub.add_parser("list", help="list registered experiments")
    sub.add_parser("check", help="run the fast invariant suite")
    return p


def _cmd_run(args) -> int:
    overrides = {"seed": args.seed, "output": args.out, "paths": args.paths, "threads": args.threads}
    try:
        config = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    log.info("running %s with %d paths", config.experiment, config.paths)
    try:
        bundle = run(config)
    except RuntimeAbort as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"wrote {config.output} ({bundle.wall_time_s:.1f} s)")
    for key, val in bundle.summary.items():
        print(f"  {key} = {val}")
    return EXIT_OK


def _cmd_list(args) -> int:
    width = max(map(len, REGISTRY))
    for name, exp in REGISTRY.items():
        print(f"{name:<{width}}  {exp.description}")
    return EXIT_OK


def _cmd_check(args) -> int:
    from .checks import run_checks

    results = run_checks()
    for r in results:
        print(r.line())
    failed = sum(not r.passed for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_RUNTIME


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    handler = {"run": _cmd_run, "list": _cmd_list, "check": _cmd_check}[args.command]
    return handler(args)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
