"""Command line entry point: ``trep-export export ...``."""

from __future__ import annotations

import argparse
import sys

from .errors import ExporterError
from .export import ExportJob, run_export
from .model import DEFAULT_MODEL_ID


def _int_list(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(tok) for tok in text.split(",") if tok.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated int list: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="trep-export",
        description="Write intermediate-layer patch embeddings as TREP containers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    ex = sub.add_parser("export", help="export one dataset region")
    ex.add_argument("--dataset", required=True, help="path to a <name>_<trainEnd>_<a>_<b>.txt file")
    ex.add_argument("--layers", required=True, type=_int_list, help="1-based block indices, comma separated")
    ex.add_argument("--patches", required=True, type=_int_list, help="reference patch indices, comma separated")
    ex.add_argument("--region", choices=("train", "test"), default="train")
    ex.add_argument("--out", required=True, help="output directory")
    ex.add_argument("--batch", type=int, default=64, help="windows per forward pass")
    ex.add_argument("--model", default=DEFAULT_MODEL_ID, help="encoder id; stub:<depth>x<d_model>x<heads> needs no download")
    ex.add_argument("--window-length", type=int, default=512)
    ex.add_argument("--patch-length", type=int, default=8)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        job = ExportJob(
            dataset=args.dataset,
            out_dir=args.out,
            layers=args.layers,
            patches=args.patches,
            region=args.region,
            window_length=args.window_length,
            patch_length=args.patch_length,
            model_id=args.model,
            batch=args.batch,
        )
        result = run_export(job)
    except (ExporterError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for exported in result.files:
        print(f"wrote {exported.path} ({exported.rows} rows)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
