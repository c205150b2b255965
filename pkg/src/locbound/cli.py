"""``locbound <kind> --config <path> [--out-dir <path>] [--seed <u64>]``."""

from __future__ import annotations

import argparse
import sys

from .errors import ConfigValidationError, IoError, ParseError
from .harness import KINDS, parse_config, run_experiment, schema_docs


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="locbound",
                                     description="Locality bounds checked against exact dynamics.")
    parser.add_argument("--list", action="store_true", help="print experiment kinds and their parameters")
    sub = parser.add_subparsers(dest="kind", metavar="<kind>")
    for kind in KINDS:
        p = sub.add_parser(kind)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out-dir", default=None, help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=_u64, default=None, help="seed override")
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.list:
        print(schema_docs())
        return 0
    if args.kind is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        print(f"error: cannot read {args.config}: {e}", file=sys.stderr)
        return 2
    try:
        cfg = parse_config(text, kind=args.kind)
    except ParseError as e:
        print(f"error: {args.config}: {e}", file=sys.stderr)
        return 2
    except ConfigValidationError as e:
        for msg in e.errors:
            print(f"error: {args.config}: {msg}", file=sys.stderr)
        return 2
    try:
        result = run_experiment(cfg, out_dir=args.out_dir, seed=args.seed)
    except ConfigValidationError as e:
        for msg in e.errors:
            print(f"error: {args.config}: {msg}", file=sys.stderr)
        return 2
    except IoError as e:
        print(f"error: {e}", file=sys.stderr)
        return 4
    if result.status == 3:
        print(f"error: {result.message}", file=sys.stderr)
    elif result.status == 1:
        print(f"BoundViolated: {len(result.violations)} check(s) failed", file=sys.stderr)
        for v in result.violations:
            print(f"  {v}", file=sys.stderr)
    else:
        print(f"{cfg.kind}: ok ({len(result.outcome.rows)} rows) -> {result.csv_path}")
    return result.status


if __name__ == "__main__":
    sys.exit(main())
