"""Nearest-neighbor benchmark: exact and random-projection-forest indexes,
k-NN voting with closest-representative tie breaking, and accuracy reports."""
from __future__ import annotations

import enum
import heapq
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .formats import PooledEmbedding

DEFAULT_TREES = 16
DEFAULT_LEAF_SIZE = 32
DEFAULT_SEED = 42
_MAX_TREE_DEPTH = 64


class Metric(enum.Enum):
    COSINE = "cosine"
    EUCLIDEAN = "euclidean"


@dataclass(frozen=True)
class Neighbor:
    id: str
    label: int
    distance: float


@dataclass(frozen=True)
class QueryResult:
    """Neighbors ascending by distance; ties keep insertion order."""

    neighbors: list[Neighbor]

    def labels(self) -> list[int]:
        return [n.label for n in self.neighbors]


@dataclass(frozen=True)
class AnnConfig:
    trees: int = DEFAULT_TREES
    leaf_size: int = DEFAULT_LEAF_SIZE
    seed: int = DEFAULT_SEED
    search_k: int | None = None  # candidate budget; default trees * leaf_size * 6


def _unit_rows(X: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(X, axis=1, keepdims=True)
    out = np.divide(X, norms, out=np.zeros_like(X), where=norms > 0)
    return out


class _Leaf:
    __slots__ = ("indices",)

    def __init__(self, indices: np.ndarray):
        self.indices = indices


class _Split:
    __slots__ = ("normal", "offset", "left", "right")

    def __init__(self, normal, offset, left, right):
        self.normal = normal
        self.offset = offset
        self.left = left
        self.right = right


def _build_tree(points: np.ndarray, indices: np.ndarray, leaf_size: int,
                rng: np.random.Generator, depth: int = 0):
    if indices.size <= leaf_size or depth >= _MAX_TREE_DEPTH:
        return _Leaf(indices)
    for _ in range(3):
        i, j = rng.choice(indices.size, size=2, replace=False)
        a, b = points[indices[i]], points[indices[j]]
        normal = a - b
        norm = np.linalg.norm(normal)
        if norm < 1e-12:
            continue
        normal = normal / norm
        offset = float(normal @ ((a + b) / 2.0))
        margins = points[indices] @ normal - offset
        right = margins > 0
        if right.all() or (~right).all():
            continue
        return _Split(normal, offset,
                      _build_tree(points, indices[~right], leaf_size, rng, depth + 1),
                      _build_tree(points, indices[right], leaf_size, rng, depth + 1))
    # degenerate cloud (duplicates); split arbitrarily to bound leaf size
    half = indices.size // 2
    return _Split(np.zeros(points.shape[1]), 0.0,
                  _build_tree(points, indices[:half], leaf_size, rng, depth + 1),
                  _build_tree(points, indices[half:], leaf_size, rng, depth + 1))


def _serialize_node(node, out: bytearray) -> None:
    if isinstance(node, _Leaf):
        out += b"L"
        out += struct.pack("<I", node.indices.size)
        out += node.indices.astype("<u4").tobytes()
    else:
        out += b"S"
        out += node.normal.astype("<f8").tobytes()
        out += struct.pack("<d", node.offset)
        _serialize_node(node.left, out)
        _serialize_node(node.right, out)


class NeighborIndex:
    """Immutable index over labeled training embeddings."""

    def __init__(self, embeddings: Sequence[PooledEmbedding], metric: Metric = Metric.COSINE,
                 ann: AnnConfig | None = None):
        if not embeddings:
            raise ValueError("cannot build an index over an empty embedding set")
        dims = {e.D for e in embeddings}
        if len(dims) != 1:
            raise ValueError(f"inconsistent embedding dimensions: {sorted(dims)}")
        self.ids = [e.id for e in embeddings]
        self.labels = np.array([e.label for e in embeddings], dtype=np.int64)
        self.vectors = np.stack([e.vector for e in embeddings]).astype(np.float64)
        self.metric = metric
        self.ann = ann
        if metric is Metric.COSINE:
            self._units = _unit_rows(self.vectors)
        self._trees: list = []
        if ann is not None:
            split_points = self._units if metric is Metric.COSINE else self.vectors
            seeds = np.random.SeedSequence(ann.seed).spawn(ann.trees)
            all_idx = np.arange(len(self.ids))
            self._trees = [_build_tree(split_points, all_idx, ann.leaf_size,
                                       np.random.default_rng(s)) for s in seeds]
            self._split_points = split_points

    @property
    def size(self) -> int:
        return len(self.ids)

    @property
    def D(self) -> int:
        return self.vectors.shape[1]

    def serialize_forest(self) -> bytes:
        out = bytearray()
        for tree in self._trees:
            _serialize_node(tree, out)
        return bytes(out)

    def _distances(self, x: np.ndarray, subset: np.ndarray | None = None) -> np.ndarray:
        if self.metric is Metric.COSINE:
            units = self._units if subset is None else self._units[subset]
            norm = np.linalg.norm(x)
            xu = x / norm if norm > 0 else np.zeros_like(x)
            return 1.0 - units @ xu
        vecs = self.vectors if subset is None else self.vectors[subset]
        return np.linalg.norm(vecs - x, axis=1)

    def _candidates(self, x: np.ndarray, search_k: int) -> np.ndarray:
        if self.metric is Metric.COSINE:
            norm = np.linalg.norm(x)
            q = x / norm if norm > 0 else x
        else:
            q = x
        # max-heap on path priority (min margin seen so far), via negation
        heap: list[tuple[float, int, object]] = [
            (-np.inf, i, tree) for i, tree in enumerate(self._trees)
        ]
        heapq.heapify(heap)
        counter = len(heap)
        seen = np.zeros(self.size, dtype=bool)
        n_collected = 0
        while heap and n_collected < search_k:
            neg_p, _, node = heapq.heappop(heap)
            p = -neg_p
            if isinstance(node, _Leaf):
                fresh = node.indices[~seen[node.indices]]
                seen[fresh] = True
                n_collected += fresh.size
            else:
                margin = float(q @ node.normal - node.offset)
                counter += 1
                heapq.heappush(heap, (-min(p, margin), counter, node.right))
                counter += 1
                heapq.heappush(heap, (-min(p, -margin), counter, node.left))
        return np.flatnonzero(seen)

    def query(self, x: np.ndarray, k: int) -> QueryResult:
        x = np.asarray(x, dtype=np.float64)
        if x.shape != (self.D,):
            raise ValueError(f"query dimension {x.shape} != index dimension ({self.D},)")
        if not 1 <= k <= self.size:
            raise ValueError(f"k={k} outside [1, {self.size}]")
        if self.ann is None:
            subset = np.arange(self.size)
        else:
            search_k = self.ann.search_k or self.ann.trees * self.ann.leaf_size * 6
            subset = self._candidates(x, max(search_k, k))
            if subset.size < k:
                subset = np.arange(self.size)
        dists = self._distances(x, subset)
        order = np.argsort(dists, kind="stable")[:k]
        return QueryResult([Neighbor(self.ids[subset[i]], int(self.labels[subset[i]]),
                                     float(dists[i])) for i in order])


def build_index(embeddings: Sequence[PooledEmbedding], metric: Metric = Metric.COSINE,
                ann: AnnConfig | None = None) -> NeighborIndex:
    return NeighborIndex(embeddings, metric=metric, ann=ann)


def classify_vote(result: QueryResult, k: int) -> int:
    """Majority label among the top k; vote ties go to the label whose
    best-ranked representative is closest."""
    if len(result.neighbors) < k:
        raise ValueError(f"result has {len(result.neighbors)} neighbors, need k={k}")
    votes: dict[int, int] = {}
    best_rank: dict[int, int] = {}
    for rank, n in enumerate(result.neighbors[:k]):
        votes[n.label] = votes.get(n.label, 0) + 1
        best_rank.setdefault(n.label, rank)
    top = max(votes.values())
    tied = [label for label, v in votes.items() if v == top]
    return min(tied, key=lambda label: best_rank[label])


@dataclass
class EvalReport:
    accuracy: float
    n_test: int
    n_train: int
    k: int
    metric: str
    backend: str
    per_class_accuracy: dict[int, float] = field(default_factory=dict)
    per_class_total: dict[int, int] = field(default_factory=dict)
    confusion: dict[tuple[int, int], int] = field(default_factory=dict)
    predictions: list[tuple[str, int, int]] = field(default_factory=list)  # id, true, predicted


def evaluate(train: Sequence[PooledEmbedding], test: Sequence[PooledEmbedding],
             metric: Metric = Metric.COSINE, k: int = 1,
             ann: AnnConfig | None = None) -> EvalReport:
    if not test:
        raise ValueError("empty test set")
    index = build_index(train, metric=metric, ann=ann)
    if not 1 <= k <= index.size:
        raise ValueError(f"k={k} outside [1, {index.size}]")
    correct = 0
    per_class_hit: dict[int, int] = {}
    per_class_total: dict[int, int] = {}
    confusion: dict[tuple[int, int], int] = {}
    predictions = []
    for emb in test:
        pred = classify_vote(index.query(emb.vector, k), k)
        true = emb.label
        predictions.append((emb.id, true, pred))
        per_class_total[true] = per_class_total.get(true, 0) + 1
        confusion[(true, pred)] = confusion.get((true, pred), 0) + 1
        if pred == true:
            correct += 1
            per_class_hit[true] = per_class_hit.get(true, 0) + 1
    per_class_acc = {c: per_class_hit.get(c, 0) / n for c, n in per_class_total.items()}
    return EvalReport(
        accuracy=correct / len(test),
        n_test=len(test),
        n_train=index.size,
        k=k,
        metric=metric.value,
        backend="exact" if ann is None else "ann",
        per_class_accuracy=per_class_acc,
        per_class_total=per_class_total,
        confusion=confusion,
        predictions=predictions,
    )


def format_report(report: EvalReport) -> str:
    """Line-oriented key=value report."""
    lines = [
        f"accuracy={report.accuracy:.4f}",
        f"n_test={report.n_test}",
        f"n_train={report.n_train}",
        f"k={report.k}",
        f"metric={report.metric}",
        f"backend={report.backend}",
    ]
    for c in sorted(report.per_class_accuracy):
        lines.append(f"per_class.{c}={report.per_class_accuracy[c]:.4f}")
    return "\n".join(lines) + "\n"


def format_confusion_tsv(report: EvalReport) -> str:
    """Tab-separated confusion dump: true label, predicted label, count."""
    lines = ["true\tpredicted\tcount"]
    for (true, pred) in sorted(report.confusion):
        lines.append(f"{true}\t{pred}\t{report.confusion[(true, pred)]}")
    return "\n".join(lines) + "\n"
