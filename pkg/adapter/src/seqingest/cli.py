"""seqingest: convert, validate, export.

Exit codes: 0 success, 1 usage error, 2 data error (including validation
failures).
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .convert import AdapterConfig, convert
from .export import export
from .formats import IngestError
from .validate import validate

USAGE_ERROR = 1
DATA_ERROR = 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(USAGE_ERROR)


def cmd_convert(args) -> int:
    config_path = Path(args.config)
    if not config_path.is_file():
        print(f"config not found: {config_path}", file=sys.stderr)
        return DATA_ERROR
    try:
        obj = json.loads(config_path.read_text())
        config = AdapterConfig.from_json(obj, config_path.parent)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
        print(f"invalid adapter config: {e}", file=sys.stderr)
        return DATA_ERROR
    stats = convert(config, args.out)
    print(
        f"wrote {args.out}: {stats.frames} frames, {stats.detections} detections, "
        f"{stats.dropped_low_confidence} dropped below the confidence floor"
    )
    return 0


def cmd_validate(args) -> int:
    if not Path(args.sequence).is_dir():
        print(f"not a directory: {args.sequence}", file=sys.stderr)
        return DATA_ERROR
    report = validate(args.sequence)
    print(report.render())
    return 0 if report.ok else DATA_ERROR


def cmd_export(args) -> int:
    export(args.sequence, args.out)
    print(f"exported {args.sequence} -> {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="seqingest", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="model outputs -> sequence directory")
    p.add_argument("--config", required=True, help="adapter config JSON")
    p.add_argument("--out", required=True, help="sequence directory to write")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("validate", help="check a sequence directory's invariants")
    p.add_argument("sequence")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export", help="sequence directory -> model-output layout")
    p.add_argument("sequence")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_export)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except IngestError as e:
        print(f"error: {e}", file=sys.stderr)
        return DATA_ERROR


if __name__ == "__main__":
    sys.exit(main())
