"""Command-line wrapper: score documents with a pretrained classifier.

Exit codes: 0 success, 2 input/model/configuration error, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import sys

from .adapter import AdapterError, AdapterJob, run_adapter


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rads-adapter",
        description="Run K stochastic forward passes (dropout active) of a "
                    "pretrained sequence classifier over a JSON-lines corpus "
                    "and emit a score file for the selection toolkit.")
    parser.add_argument("--model", required=True,
                        help="model checkpoint: hub id or local path")
    parser.add_argument("--input", required=True,
                        help="JSON-lines corpus, one {\"id\", \"text\"} per line")
    parser.add_argument("--output", required=True, help="output score file (JSON lines)")
    parser.add_argument("--passes", type=int, default=10,
                        help="stochastic forward passes per document (default 10)")
    parser.add_argument("--max-length", dest="max_length", type=int, default=512,
                        help="token truncation length (default 512)")
    parser.add_argument("--batch-size", dest="batch_size", type=int, default=8,
                        help="inference batch size (default 8)")
    parser.add_argument("--seed", type=int, default=0, help="dropout-mask seed (default 0)")
    parser.add_argument("--no-dropout", action="store_true",
                        help="sanity mode: plain eval passes, all rows identical")
    parser.add_argument("--head-dropout-only", action="store_true",
                        help="keep encoder dropout off; only head dropout is stochastic")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    job_kwargs = dict(
        model=args.model, input_path=args.input, output_path=args.output,
        passes=args.passes, max_length=args.max_length, batch_size=args.batch_size,
        seed=args.seed, dropout=not args.no_dropout,
        head_dropout_only=args.head_dropout_only)
    try:
        report = run_adapter(AdapterJob(**job_kwargs))
    except AdapterError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # model execution failures
        print(f"runtime error: {e}", file=sys.stderr)
        return 1
    msg = (f"scored {report.documents} documents x {report.passes} passes -> {args.output}"
           f" ({report.truncated} truncated)")
    print(msg)
    for warning in report.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
