"""``cachesim`` command-line entry point.

Exit codes: 0 success, 2 configuration or argument error, 3 validation
failure, 4 infeasible design.
"""

from __future__ import annotations

import argparse
import sys

from . import experiments
from .config import load_config
from .errors import CachesimError, ConfigError, InfeasibleDesignError

EXIT_OK, EXIT_CONFIG, EXIT_VALIDATION, EXIT_INFEASIBLE = 0, 2, 3, 4

_COMMANDS = {
    "lcu-curve": experiments.lcu_curve,
    "ccm-curve": experiments.ccm_curve,
    "simulate": experiments.simulate_trials,
    "bounds": experiments.bound_table,
}


def _u64(text):
    v = int(text)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cachesim", description="Cache-aided multicast distortion experiments.")
    sub = ap.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", help="CSV output path (default: config 'output', else stdout)")
        p.add_argument("--seed", type=_u64, help="override the config's master seed")
        p.add_argument("--threads", type=int, help="worker threads (default: $CACHESIM_THREADS or 1)")
    v = sub.add_parser("validate", help="run the oracle cross-checks")
    v.add_argument("--threads", type=int, help="accepted for symmetry; checks run serially")
    return ap


def _validate() -> int:
    from .validation import run_all

    results = run_all()
    for r in results:
        print(f"{'PASS' if r.ok else 'FAIL'}  {r.name}: {r.detail}")
    failed = sum(not r.ok for r in results)
    print(f"{len(results) - failed}/{len(results)} checks passed")
    return EXIT_OK if failed == 0 else EXIT_VALIDATION


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return EXIT_OK if e.code == 0 else EXIT_CONFIG
    if args.command == "validate":
        return _validate()
    threads = experiments.resolve_threads(args.threads)
    try:
        cfg = load_config(args.config, seed=args.seed)
        header, rows = _COMMANDS[args.command](cfg, threads)
        out = args.out or cfg.output
        text = experiments.write_outputs(out, args.command, cfg, header, rows, threads)
        if out is None:
            sys.stdout.write(text)
    except (ConfigError, OSError) as e:
        print(f"config error:\n{e}", file=sys.stderr)
        return EXIT_CONFIG
    except InfeasibleDesignError as e:
        print(f"infeasible design: {e}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except CachesimError as e:
        print(f"invalid input: {e}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
