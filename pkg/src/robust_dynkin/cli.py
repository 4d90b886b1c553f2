"""``rdg <command> [spec.json] [options]`` -- prints a JSON report, exit 0 iff every check passes."""

from __future__ import annotations

import argparse
import json
import sys

from .errors import DynkinError
from .gamespec import load_spec
from .runner import COMMANDS, Flags, run


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="rdg", description="Robust Dynkin game solver and verification harness.")
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("spec", nargs="?", help="game spec JSON (optional for sweep)")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--n-max", type=int, default=None)
    p.add_argument("--count", type=int, default=None)
    p.add_argument("--dump-values", metavar="CSV", default=None)
    p.add_argument("--all-orders", action="store_true")
    p.add_argument("--tol-oracle", type=float, default=None)
    p.add_argument("--tol-submart", type=float, default=None)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    flags = Flags(args.workers, args.seed, args.n_max, args.count, args.dump_values,
                  args.all_orders, args.tol_oracle, args.tol_submart)
    try:
        game, digest = load_spec(args.spec) if args.spec else (None, None)
        report = run(args.command, game, flags, digest)
    except (DynkinError, ValueError, OSError) as exc:
        print(json.dumps({"command": args.command, "error": type(exc).__name__, "message": str(exc)}),
              file=sys.stderr)
        return 2
    json.dump(report, sys.stdout, indent=1, sort_keys=True)
    sys.stdout.write("\n")
    return 0 if report["ok"] else 1


if __name__ == "__main__":
    sys.exit(main())
