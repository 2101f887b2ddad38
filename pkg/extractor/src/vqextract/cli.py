"""vqextract: turn wav2vec2-family checkpoints plus a WAV manifest into SPD1
datasets, and re-validate existing datasets."""
from __future__ import annotations

import argparse
import sys

from . import spd1
from .extract import ManifestError, UnsupportedModelError, extract


def cmd_extract(args: argparse.Namespace) -> int:
    summary = extract(args.manifest, args.model, args.out,
                      layer=args.layer, batch_size=args.batch_size)
    print(f"wrote {args.out}: {summary.n_written} utterances, "
          f"{len(summary.label_names)} labels", file=sys.stderr)
    for path, reason in summary.failures:
        print(f"failed: {path}: {reason}", file=sys.stderr)
    if summary.failures:
        print(f"{len(summary.failures)} file(s) failed", file=sys.stderr)
    return 0


def cmd_verify(args: argparse.Namespace) -> int:
    with open(args.dataset, "rb") as f:
        header, records = spd1.read(f)
        n = sum(1 for _ in records)  # validates every record
    print(f"F={header.F} G={header.G} V={header.V} L={header.L} N={header.N}")
    if n == 0:
        print("warning: dataset is empty (N=0)", file=sys.stderr)
    print("ok")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vqextract",
        description="Extract SPD1 frame datasets from wav2vec2-family checkpoints.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("extract", help="run a checkpoint over a labeled WAV manifest")
    p.add_argument("--manifest", required=True,
                   help="tab-separated file: audio path, label string")
    p.add_argument("--model", required=True, help="checkpoint path or hub id")
    p.add_argument("--layer", type=int, default=None,
                   help="transformer hidden-state index for C (default: final layer)")
    p.add_argument("--batch-size", type=int, default=8)
    p.add_argument("--out", required=True, help="output SPD1 path")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("verify", help="re-validate an SPD1 dataset")
    p.add_argument("dataset", help="SPD1 file to check")
    p.set_defaults(func=cmd_verify)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (spd1.Spd1Error, ManifestError, UnsupportedModelError,
            FileNotFoundError, OSError, ValueError) as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
