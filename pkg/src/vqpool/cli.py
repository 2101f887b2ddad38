"""vqpool: single entry point for counts building, pooling, transforms,
benchmarking, weight analytics, and synthetic dataset generation.

Exit codes: 0 on success, 2 for configuration/input errors, 1 for unexpected
failures. Diagnostics go to stderr; data and reports go to files or stdout.
"""
from __future__ import annotations

import argparse
import dataclasses
import os
import sys
from pathlib import Path

import numpy as np

from . import analysis, formats, knn, methods, synth, transforms, vq
from .formats import FormatError, PooledEmbedding, ValidationError
from .methods import MethodConfigError, UnsupportedMethodError
from .transforms import NumericalError, ParameterError


class CliError(Exception):
    """Configuration or input error; maps to exit code 2."""


def _resolve_threads(value: int | None) -> int | None:
    if value is not None:
        return value
    env = os.environ.get("VQPOOL_THREADS")
    if env:
        try:
            return int(env)
        except ValueError:
            raise CliError(f"VQPOOL_THREADS={env!r} is not an integer") from None
    return os.cpu_count()


def _require_file(path: str, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise CliError(f"{what} not found: {path}")
    return p


def _method_from_args(args: argparse.Namespace) -> methods.PoolingMethod:
    return methods.parse_method(args.method, equality=args.equality,
                                sif_a=args.sif_a, sif_normalize=args.sif_normalize)


def _load_counts_for(method: methods.PoolingMethod,
                     counts_path: str | None) -> vq.CodebookCounts | None:
    if not method.needs_counts:
        if counts_path:
            print(f"note: --counts is ignored by method {method.kind.value}", file=sys.stderr)
        return None
    if counts_path is None:
        raise CliError(f"method {method.kind.value} requires --counts "
                       f"(build one with `vqpool counts`)")
    return vq.load_counts(_require_file(counts_path, "counts file"))


def _add_method_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--method", required=True,
                   help="pooling method: ap | sp | squash | allsquash | sif | gp | lp | bp")
    p.add_argument("--equality", choices=["and", "or"], default=None,
                   help="frame-equality mode for squash/allsquash (default: and)")
    p.add_argument("--sif-a", type=float, default=vq.DEFAULT_SIF_A,
                   help="SIF smoothing hyperparameter a (default: %(default)s)")
    p.add_argument("--sif-normalize", action="store_true",
                   help="use relative frequencies instead of raw counts in SIF")


def _add_transform_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--transform", choices=["none", "whiten", "softdecay"], default="none",
                   help="corpus-level transform applied to pooled embeddings")
    p.add_argument("--alpha", type=float, default=transforms.DEFAULT_SOFT_DECAY_ALPHA,
                   help="SoftDecay singular-value decay parameter (default: %(default)s)")
    p.add_argument("--whitening-out", default=None,
                   help="write the fitted whitening model (SPW1) to this path")


def _apply_transform(args: argparse.Namespace, fit_embs: list[PooledEmbedding],
                     *emb_sets: list[PooledEmbedding]) -> None:
    """Fit on fit_embs, apply in place to every set (fit set included)."""
    if args.transform == "none":
        return
    fit_matrix = np.stack([e.vector for e in fit_embs]).astype(np.float64)
    if args.transform == "whiten":
        model = transforms.fit_whitening(fit_matrix)
        if args.whitening_out:
            transforms.save_whitening(args.whitening_out, model)
        for emb_set in emb_sets:
            for emb in emb_set:
                emb.vector = transforms.apply_whitening(model, emb.vector).astype(np.float32)
    else:
        params = transforms.SoftDecayParams(alpha=args.alpha)
        # On the fit set, right-multiplying by V diag(sigma'/sigma) V^T equals
        # soft_decay_transform; the same linear map carries over to other sets.
        U, sigma, V = transforms.svd(fit_matrix)
        if sigma[0] == 0.0:
            return
        mapped = transforms.soft_exponential(sigma, params.alpha)
        if mapped[0] <= 0.0:
            raise ParameterError(f"alpha={params.alpha} maps the top singular value to "
                                 f"{mapped[0]:g}; rescaling is undefined")
        scale = np.divide(mapped * (sigma[0] / mapped[0]), sigma,
                          out=np.ones_like(sigma), where=sigma > 0)
        M = V @ np.diag(scale) @ V.T  # right-multiplication decays the spectrum
        for emb_set in emb_sets:
            for emb in emb_set:
                emb.vector = (emb.vector.astype(np.float64) @ M).astype(np.float32)


def cmd_counts(args: argparse.Namespace) -> int:
    header, records = formats.load_dataset(_require_file(args.dataset, "dataset"))
    counts = vq.build_counts_from_records(records, header.G, header.V)
    vq.save_counts(args.out, counts)
    distinct = (counts.group_counts > 0).sum(axis=1)
    print(f"total_frames={counts.total_frames}", file=sys.stderr)
    for g, n in enumerate(distinct):
        print(f"group{g}.distinct_indices={int(n)}", file=sys.stderr)
    return 0


def cmd_pool(args: argparse.Namespace) -> int:
    method = _method_from_args(args)
    counts = _load_counts_for(method, args.counts)
    dataset_path = _require_file(args.dataset, "dataset")
    header, records = formats.load_dataset(dataset_path)
    embs = methods.pool_records(records, method, counts, threads=_resolve_threads(args.threads))
    _apply_transform(args, embs, embs)
    formats.save_embeddings(args.out, embs, header.L, D=method.output_dim(header.F))
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    method = _method_from_args(args)
    train_path = _require_file(args.train, "train dataset")
    test_path = _require_file(args.test, "test dataset")
    train_header, train_records = formats.load_dataset(train_path)
    counts = None
    if method.needs_counts:
        if args.counts:
            counts = vq.load_counts(_require_file(args.counts, "counts file"))
        else:
            counts = vq.build_counts_from_records(train_records, train_header.G, train_header.V)
    test_header, test_records = formats.load_dataset(test_path)
    if (test_header.F, test_header.G, test_header.V) != \
            (train_header.F, train_header.G, train_header.V):
        raise CliError("train/test datasets disagree on F/G/V")
    threads = _resolve_threads(args.threads)
    train_embs = methods.pool_records(train_records, method, counts, threads=threads)
    test_embs = methods.pool_records(test_records, method, counts, threads=threads)
    _apply_transform(args, train_embs, train_embs, test_embs)
    ann = None
    if args.index == "ann":
        ann = knn.AnnConfig(trees=args.trees, leaf_size=args.leaf_size, seed=args.seed)
    report = knn.evaluate(train_embs, test_embs, metric=knn.Metric(args.metric),
                          k=args.k, ann=ann)
    sys.stdout.write(knn.format_report(report))
    if args.confusion_out:
        Path(args.confusion_out).write_text(knn.format_confusion_tsv(report), encoding="utf-8")
    return 0


def cmd_gen(args: argparse.Namespace) -> int:
    spec = synth.SyntheticSpec(
        classes=args.classes, utterances_per_class=args.train_per_class,
        F=args.F, G=args.G, V=args.V, t_min=args.t_min, t_max=args.t_max,
        filler_fraction=args.filler_fraction, noise_scale=args.noise_scale,
        seed=args.seed, filler_tuples=args.filler_tuples,
        keywords_per_class=args.keywords_per_class)
    try:
        spec.validate()
    except ValueError as exc:
        raise CliError(str(exc)) from None
    names = synth.label_names(spec)
    for split, per_class in (("train", args.train_per_class), ("test", args.test_per_class)):
        split_spec = dataclasses.replace(spec, utterances_per_class=per_class)
        records = synth.generate_synthetic(split_spec, split)
        path = f"{args.out}.{split}.spd1"
        formats.save_dataset(path, records, split_spec.header(len(records)))
        formats.save_label_names(path, names)
        print(f"wrote {path} ({len(records)} utterances)", file=sys.stderr)
    return 0


def cmd_export_weights(args: argparse.Namespace) -> int:
    method = _method_from_args(args)
    counts = _load_counts_for(method, args.counts)
    _, records = formats.load_dataset(_require_file(args.dataset, "dataset"))
    try:
        rows = analysis.export_weights(records, method, counts)
    except UnsupportedMethodError as exc:
        raise CliError(str(exc)) from None
    if args.out:
        with open(args.out, "w", encoding="utf-8") as f:
            analysis.write_weight_rows(rows, f)
    else:
        analysis.write_weight_rows(rows, sys.stdout)
    return 0


def cmd_compare_weights(args: argparse.Namespace) -> int:
    comparison = analysis.compare_weight_files(
        _require_file(args.reference, "reference weights file"),
        _require_file(args.candidate, "candidate weights file"))
    for rec_id, value in comparison.per_utterance.items():
        sys.stdout.write(f"kl.{rec_id}={value:.6f}\n")
    sys.stdout.write(f"mean={comparison.mean:.6f}\n")
    sys.stdout.write(f"median={comparison.median:.6f}\n")
    return 0


def cmd_export_embeddings(args: argparse.Namespace) -> int:
    method = _method_from_args(args)
    counts = _load_counts_for(method, args.counts)
    header, records = formats.load_dataset(_require_file(args.dataset, "dataset"))
    embs = methods.pool_records(records, method, counts, threads=_resolve_threads(args.threads))
    formats.save_embeddings(f"{args.out}.spe1", embs, header.L, D=method.output_dim(header.F))
    with open(f"{args.out}.tsv", "w", encoding="utf-8") as f:
        analysis.embeddings_to_tsv(embs, f)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vqpool",
        description="Pool variable-length speech representations into fixed-size "
                    "embeddings and evaluate them with a nearest-neighbor benchmark.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("counts", help="count quantized indices over a training dataset")
    p.add_argument("dataset", help="SPD1 training dataset")
    p.add_argument("--out", required=True, help="output SPC1 counts file")
    p.set_defaults(func=cmd_counts)

    p = sub.add_parser("pool", help="pool a dataset into fixed-size embeddings")
    p.add_argument("dataset", help="SPD1 dataset")
    _add_method_flags(p)
    p.add_argument("--counts", default=None, help="SPC1 counts file (required for sif/gp/bp)")
    _add_transform_flags(p)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: $VQPOOL_THREADS or CPU count)")
    p.add_argument("--out", required=True, help="output SPE1 embeddings file")
    p.set_defaults(func=cmd_pool)

    p = sub.add_parser("bench", help="pool train/test splits and run the k-NN benchmark")
    p.add_argument("--train", required=True, help="SPD1 training dataset")
    p.add_argument("--test", required=True, help="SPD1 test dataset")
    _add_method_flags(p)
    p.add_argument("--counts", default=None,
                   help="SPC1 counts file; built from the train split when omitted")
    _add_transform_flags(p)
    p.add_argument("--metric", choices=["cosine", "euclidean"], default="cosine")
    p.add_argument("--k", type=int, default=1, help="number of voting neighbors")
    p.add_argument("--index", choices=["exact", "ann"], default="exact")
    p.add_argument("--trees", type=int, default=knn.DEFAULT_TREES)
    p.add_argument("--leaf-size", type=int, default=knn.DEFAULT_LEAF_SIZE)
    p.add_argument("--seed", type=int, default=knn.DEFAULT_SEED)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--confusion-out", default=None,
                   help="write the full confusion matrix as TSV to this path")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("gen", help="generate synthetic train/test datasets")
    p.add_argument("--out", required=True, help="output prefix; writes <out>.{train,test}.spd1")
    p.add_argument("--classes", type=int, default=10)
    p.add_argument("--train-per-class", type=int, default=50)
    p.add_argument("--test-per-class", type=int, default=20)
    p.add_argument("--F", type=int, default=16)
    p.add_argument("--G", type=int, default=2)
    p.add_argument("--V", type=int, default=64)
    p.add_argument("--t-min", type=int, default=20)
    p.add_argument("--t-max", type=int, default=100)
    p.add_argument("--filler-fraction", type=float, default=0.8)
    p.add_argument("--noise-scale", type=float, default=1.5)
    p.add_argument("--filler-tuples", type=int, default=3)
    p.add_argument("--keywords-per-class", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("export-weights", help="export per-frame pooling weights as TSV")
    p.add_argument("dataset", help="SPD1 dataset")
    _add_method_flags(p)
    p.add_argument("--counts", default=None)
    p.add_argument("--out", default=None, help="output path (default: stdout)")
    p.set_defaults(func=cmd_export_weights)

    p = sub.add_parser("compare-weights", help="KL divergence between two weight files")
    p.add_argument("reference", help="reference weights file (P)")
    p.add_argument("candidate", help="candidate weights file (Q)")
    p.set_defaults(func=cmd_compare_weights)

    p = sub.add_parser("export-embeddings",
                       help="pool a dataset and emit SPE1 plus a TSV text form")
    p.add_argument("dataset", help="SPD1 dataset")
    _add_method_flags(p)
    p.add_argument("--counts", default=None)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--out", required=True, help="output prefix; writes <out>.spe1 and <out>.tsv")
    p.set_defaults(func=cmd_export_embeddings)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (CliError, MethodConfigError, UnsupportedMethodError, ValidationError,
            FormatError, ParameterError, FileNotFoundError, ValueError) as exc:
        print(f"error ({args.command}): {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical error ({args.command}): {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
