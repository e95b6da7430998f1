"""Command line entry point: ``cylmart <kind> --config path.json [--seed N] [--out dir]``."""
from __future__ import annotations

import argparse
import json
import sys

from .campaigns import run
from .config import KINDS, config_from_dict, load_config
from .errors import ConfigError, CylmartError
from .report import render


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cylmart", description=__doc__)
    p.add_argument("kind", choices=KINDS)
    p.add_argument("--config", help="JSON experiment config (defaults apply when omitted)")
    p.add_argument("--seed", type=int, help="override the config seed")
    p.add_argument("--out", help="output directory for report.json and CSV tables")
    p.add_argument("--quiet", action="store_true", help="do not print the summary table")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.kind) if args.config else config_from_dict({}, args.kind)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        cfg.validate()
        report = run(cfg, cfg.out)
    except ConfigError as e:
        print(json.dumps({"error": "ConfigError", "fields": e.errors}), file=sys.stderr)
        return 2
    except CylmartError as e:
        print(f"{type(e).__name__}: {e}", file=sys.stderr)
        return 3
    if not args.quiet:
        sys.stdout.write(render(report))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
