"""Weight-distribution analytics: KL divergence between pooling-weight
distributions and text exports of weights and embeddings."""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, TextIO

import numpy as np

from .formats import PooledEmbedding, UtteranceRecord
from .methods import PoolingMethod, frame_weights
from .pooling import PoolingWeights
from .vq import CodebookCounts

KL_EPS = 1e-12


@dataclass(frozen=True)
class WeightDistribution:
    id: str
    probabilities: np.ndarray  # (T,), >= 0, sums to 1

    def validate(self) -> None:
        p = self.probabilities
        if p.ndim != 1 or p.shape[0] < 1:
            raise ValueError(f"{self.id!r}: probabilities must be a nonempty vector")
        if (p < 0).any() or not np.isfinite(p).all():
            raise ValueError(f"{self.id!r}: probabilities must be finite and nonnegative")
        if abs(float(p.sum()) - 1.0) > 1e-6:
            raise ValueError(f"{self.id!r}: probabilities sum to {float(p.sum())}, expected 1")


def weights_to_distribution(w: PoolingWeights, id: str = "") -> WeightDistribution:
    dist = WeightDistribution(id, w.probabilities())
    dist.validate()
    return dist


def kl_divergence(P: WeightDistribution, Q: WeightDistribution) -> float:
    """sum_t P_t ln(P_t / Q_t), with 0 ln(0/q) = 0 and zero Q entries floored
    at 1e-12 so that KL(P, P) is exactly 0."""
    p = np.asarray(P.probabilities, dtype=np.float64)
    q = np.asarray(Q.probabilities, dtype=np.float64)
    if p.shape != q.shape:
        raise ValueError(f"length mismatch: P has {p.shape[0]} entries, Q has {q.shape[0]}")
    mask = p > 0
    denom = np.where(q > 0, q, KL_EPS)
    return float(np.sum(p[mask] * np.log(p[mask] / denom[mask])))


def write_weight_rows(rows: Sequence[tuple[str, np.ndarray]], stream: TextIO) -> None:
    """Tab-separated: id, T, then T probabilities at 9 significant digits."""
    for rec_id, probs in rows:
        cells = [rec_id, str(len(probs))] + [f"{p:.9g}" for p in probs]
        stream.write("\t".join(cells) + "\n")


def parse_weight_rows(stream: TextIO) -> dict[str, np.ndarray]:
    out: dict[str, np.ndarray] = {}
    for lineno, line in enumerate(stream, start=1):
        line = line.rstrip("\n")
        if not line:
            continue
        cells = line.split("\t")
        if len(cells) < 3:
            raise ValueError(f"weights file line {lineno}: expected id, T, probabilities")
        rec_id, t_str, *values = cells
        if int(t_str) != len(values):
            raise ValueError(f"weights file line {lineno}: declared T={t_str} "
                             f"but found {len(values)} values")
        out[rec_id] = np.array([float(v) for v in values])
    return out


def export_weights(records: Sequence[UtteranceRecord], method: PoolingMethod,
                   counts: CodebookCounts | None = None) -> list[tuple[str, np.ndarray]]:
    """Frame-weight probabilities per utterance, in dataset order."""
    return [(rec.id, frame_weights(rec, method, counts).probabilities()) for rec in records]


@dataclass
class WeightComparison:
    per_utterance: dict[str, float]
    mean: float
    median: float


def compare_weight_distributions(reference: dict[str, np.ndarray],
                                 candidate: dict[str, np.ndarray]) -> WeightComparison:
    """KL(reference || candidate) per utterance plus mean/median."""
    missing = sorted(set(reference) ^ set(candidate))
    if missing:
        raise ValueError(f"utterance ids not shared by both files: {missing[:20]}")
    per: dict[str, float] = {}
    for rec_id in reference:
        p = WeightDistribution(rec_id, reference[rec_id])
        q = WeightDistribution(rec_id, candidate[rec_id])
        p.validate()
        q.validate()
        if p.probabilities.shape != q.probabilities.shape:
            raise ValueError(f"utterance {rec_id!r}: length mismatch "
                             f"({p.probabilities.shape[0]} vs {q.probabilities.shape[0]})")
        per[rec_id] = kl_divergence(p, q)
    values = np.array(list(per.values()))
    return WeightComparison(per_utterance=per, mean=float(values.mean()),
                            median=float(np.median(values)))


def compare_weight_files(reference_path: str | Path, candidate_path: str | Path) -> WeightComparison:
    with open(reference_path, encoding="utf-8") as f:
        ref = parse_weight_rows(f)
    with open(candidate_path, encoding="utf-8") as f:
        cand = parse_weight_rows(f)
    return compare_weight_distributions(ref, cand)


def embeddings_to_tsv(embeddings: Sequence[PooledEmbedding], stream: TextIO) -> None:
    """Plain-text embedding export for external plotting (e.g. t-SNE stacks)."""
    for emb in embeddings:
        cells = [emb.id, str(emb.label)] + [f"{v:.9g}" for v in emb.vector]
        stream.write("\t".join(cells) + "\n")
