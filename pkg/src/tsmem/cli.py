"""Command-line interface.

Every run setting can come from a config file (--config), a --set
key=value override, or the mirrored per-key flag; later sources win.
Commands exit 0 on success and nonzero with a diagnostic on stderr.
"""

from __future__ import annotations

import argparse
import sys
from typing import Optional, Sequence

from .config import SCHEMA, RunConfig, resolve_config
from .errors import TsmemError
from .pipeline import cmd_build_memory, cmd_eval, cmd_score, cmd_sweep
from .synth import write_suite


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="path to a key=value config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override one config key (repeatable)",
    )
    group = parser.add_argument_group("config keys (mirror the config file)")
    for key, help_text in SCHEMA.items():
        group.add_argument(
            f"--{key.replace('_', '-')}",
            dest=f"key_{key}",
            default=None,
            metavar="V",
            help=help_text,
        )


def _resolve(args: argparse.Namespace) -> RunConfig:
    overrides = list(args.overrides)
    for key in SCHEMA:
        value = getattr(args, f"key_{key}", None)
        if value is not None:
            overrides.append(f"{key}={value}")
    return resolve_config(args.config, overrides)


def _parse_sweep_values(axis: str, raw: str) -> list[object]:
    values: list[object] = []
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        if axis == "distance":
            values.append(part)
        elif axis == "coreset_size" and part == "unbounded":
            values.append(None)
        else:
            values.append(int(part))
    return values


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tsmem",
        description=(
            "Memory-bank anomaly detection over windowed time-series embeddings"
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser(
        "build-memory", help="build and persist one memory bank per dataset"
    )
    _add_config_flags(p_build)

    p_score = sub.add_parser(
        "score", help="score test regions against persisted banks"
    )
    _add_config_flags(p_score)

    p_eval = sub.add_parser(
        "eval", help="end-to-end evaluation with Top-1 and alpha-quantile metrics"
    )
    _add_config_flags(p_eval)

    p_sweep = sub.add_parser(
        "sweep", help="repeat the evaluation while varying one axis"
    )
    _add_config_flags(p_sweep)
    p_sweep.add_argument(
        "--axis",
        required=True,
        choices=["layer", "reference_patch", "coreset_size", "distance"],
    )
    p_sweep.add_argument(
        "--values",
        required=True,
        help="comma-separated axis values (coreset_size accepts 'unbounded')",
    )

    p_synth = sub.add_parser(
        "synth-data", help="emit the synthetic labeled anomaly suite"
    )
    p_synth.add_argument("--out", required=True, help="output directory")
    p_synth.add_argument("--count", type=int, default=20)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--length", type=int, default=4000)
    p_synth.add_argument("--train-end", type=int, default=2000)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "synth-data":
            paths = write_suite(
                args.out,
                count=args.count,
                seed=args.seed,
                length=args.length,
                train_end=args.train_end,
            )
            print(f"wrote {len(paths)} series to {args.out}")
            return 0

        config = _resolve(args)
        if args.command == "build-memory":
            written = cmd_build_memory(config)
            for path in written:
                print(f"wrote {path}")
            return 0
        if args.command == "score":
            csv_paths, report_path = cmd_score(config)
            for path in csv_paths:
                print(f"wrote {path}")
            print(f"wrote {report_path}")
            return 0
        if args.command == "eval":
            report, path = cmd_eval(config)
            print(report.table())
            print(f"wrote {path}")
            if report.failed:
                for item in report.failed:
                    print(f"failed: {item}", file=sys.stderr)
                return 1
            return 0
        if args.command == "sweep":
            values = _parse_sweep_values(args.axis, args.values)
            points = cmd_sweep(config, args.axis, values)
            for point in points:
                print(
                    f"{args.axis}={point.value}: "
                    f"top1 {point.report.top1_accuracy_pct:.1f}%"
                )
            if any(p.report.failed for p in points):
                for p in points:
                    for item in p.report.failed:
                        print(f"failed ({args.axis}={p.value}): {item}", file=sys.stderr)
                return 1
            return 0
        raise AssertionError(f"unhandled command {args.command}")
    except (TsmemError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
