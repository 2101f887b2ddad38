"""Vector-quantization-driven pooling.

Partitioning (Squash / AllSquash under AND / OR frame equality) and
frequency-derived weights (SIF, GP, LP, BP) computed from codebook index
counts. Indices are 0-based throughout, matching the on-disk formats.
"""
from __future__ import annotations

import enum
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterable

import numpy as np

from .formats import FormatError, UtteranceRecord
from .pooling import PoolingWeights, normalize_weights, pool_weighted

COUNTS_MAGIC = b"SPC1"
DEFAULT_SIF_A = 1e-3


class EqualityMode(enum.Enum):
    AND = "and"
    OR = "or"


@dataclass
class FramePartition:
    """Disjoint nonempty frame-index sets covering [0, T).

    Partitions are ordered by their smallest member index; members within a
    partition are sorted ascending.
    """

    partitions: list[np.ndarray]
    n_frames: int

    def __len__(self) -> int:
        return len(self.partitions)

    def validate(self) -> None:
        seen = np.zeros(self.n_frames, dtype=bool)
        for part in self.partitions:
            if part.size == 0:
                raise ValueError("empty partition")
            if seen[part].any():
                raise ValueError("partitions are not disjoint")
            seen[part] = True
        if not seen.all():
            raise ValueError("partitions do not cover all frames")

    def member_sizes(self) -> np.ndarray:
        """For each frame t, the size |P(t)| of the partition containing it."""
        sizes = np.zeros(self.n_frames, dtype=np.int64)
        for part in self.partitions:
            sizes[part] = part.size
        return sizes


@dataclass
class CodebookCounts:
    """Global index counts over a training set.

    group_counts[g, v] is the number of frames whose group-g index equals v;
    tuple_counts maps full G-tuples to their frame counts.
    """

    group_counts: np.ndarray  # (G, V) int64
    tuple_counts: dict[tuple[int, ...], int] = field(default_factory=dict)
    total_frames: int = 0

    @property
    def G(self) -> int:
        return self.group_counts.shape[0]

    @property
    def V(self) -> int:
        return self.group_counts.shape[1]

    def validate(self) -> None:
        sums = self.group_counts.sum(axis=1)
        if not (sums == self.total_frames).all():
            raise ValueError(f"group count sums {sums.tolist()} != total_frames {self.total_frames}")
        if sum(self.tuple_counts.values()) != self.total_frames:
            raise ValueError("tuple count sum != total_frames")

    def add(self, Q: np.ndarray) -> None:
        """Accumulate one utterance's index matrix (T x G)."""
        Q = np.asarray(Q)
        if Q.ndim != 2 or Q.shape[1] != self.G:
            raise ValueError(f"Q must be T x {self.G}, got shape {Q.shape}")
        if Q.size and int(Q.max()) >= self.V:
            raise ValueError(f"Q index {int(Q.max())} >= V={self.V}")
        for g in range(self.G):
            np.add.at(self.group_counts[g], Q[:, g].astype(np.int64), 1)
        for row in Q:
            key = tuple(int(x) for x in row)
            self.tuple_counts[key] = self.tuple_counts.get(key, 0) + 1
        self.total_frames += Q.shape[0]

    def merge(self, other: "CodebookCounts") -> None:
        if other.G != self.G or other.V != self.V:
            raise ValueError("cannot merge counts with different G/V")
        self.group_counts += other.group_counts
        for key, n in other.tuple_counts.items():
            self.tuple_counts[key] = self.tuple_counts.get(key, 0) + n
        self.total_frames += other.total_frames


def build_counts(qs: Iterable[np.ndarray], G: int, V: int) -> CodebookCounts:
    """Count quantized indices over all frames of a training set."""
    counts = CodebookCounts(group_counts=np.zeros((G, V), dtype=np.int64))
    n = 0
    for Q in qs:
        counts.add(Q)
        n += 1
    if n == 0:
        raise ValueError("cannot build counts from an empty dataset")
    return counts


def build_counts_from_records(records: Iterable[UtteranceRecord], G: int, V: int) -> CodebookCounts:
    return build_counts((rec.Q for rec in records), G, V)


def write_counts(counts: CodebookCounts, stream: BinaryIO) -> None:
    """Write an SPC1 counts file: dense per-group arrays, sparse tuple entries."""
    counts.validate()
    stream.write(COUNTS_MAGIC)
    stream.write(struct.pack("<IIQ", counts.G, counts.V, counts.total_frames))
    stream.write(counts.group_counts.astype("<u8").tobytes())
    entry = struct.Struct(f"<{counts.G}HQ")
    for key in sorted(counts.tuple_counts):
        stream.write(entry.pack(*key, counts.tuple_counts[key]))


def read_counts(stream: BinaryIO) -> CodebookCounts:
    magic = stream.read(4)
    if magic != COUNTS_MAGIC:
        raise FormatError(f"bad counts magic {magic!r}, expected {COUNTS_MAGIC!r}", 0)
    fixed = stream.read(16)
    if len(fixed) != 16:
        raise FormatError("truncated counts header", 4)
    G, V, total = struct.unpack("<IIQ", fixed)
    dense = stream.read(G * V * 8)
    if len(dense) != G * V * 8:
        raise FormatError("truncated group count table", 20)
    group_counts = np.frombuffer(dense, dtype="<u8").reshape(G, V).astype(np.int64)
    entry = struct.Struct(f"<{G}HQ")
    tuple_counts: dict[tuple[int, ...], int] = {}
    while True:
        buf = stream.read(entry.size)
        if not buf:
            break
        if len(buf) != entry.size:
            raise FormatError("truncated tuple count entry")
        *key, n = entry.unpack(buf)
        tuple_counts[tuple(key)] = n
    counts = CodebookCounts(group_counts=group_counts, tuple_counts=tuple_counts,
                            total_frames=total)
    counts.validate()
    return counts


def save_counts(path: str | Path, counts: CodebookCounts) -> None:
    with open(path, "wb") as f:
        write_counts(counts, f)


def load_counts(path: str | Path) -> CodebookCounts:
    with open(path, "rb") as f:
        return read_counts(f)


def frames_equal(q_i: np.ndarray, q_j: np.ndarray, mode: EqualityMode) -> bool:
    """AND: equal in every group; OR: equal in at least one group."""
    q_i = np.asarray(q_i)
    q_j = np.asarray(q_j)
    if q_i.shape != q_j.shape:
        raise ValueError(f"tuple shapes differ: {q_i.shape} vs {q_j.shape}")
    eq = q_i == q_j
    return bool(eq.all()) if mode is EqualityMode.AND else bool(eq.any())


def squash_partition(Q: np.ndarray, mode: EqualityMode) -> FramePartition:
    """CTC-style runs: consecutive frames merge while pairwise equal."""
    Q = np.asarray(Q)
    T = Q.shape[0]
    if T < 1:
        raise ValueError("Q must have at least one frame")
    parts: list[np.ndarray] = []
    start = 0
    for t in range(1, T):
        if not frames_equal(Q[t], Q[t - 1], mode):
            parts.append(np.arange(start, t))
            start = t
    parts.append(np.arange(start, T))
    return FramePartition(parts, T)


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, x: int) -> int:
        root = x
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[x] != root:
            self.parent[x], x = root, self.parent[x]
        return root

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[max(ra, rb)] = min(ra, rb)


def allsquash_partition(Q: np.ndarray, mode: EqualityMode) -> FramePartition:
    """Order-free squashing over the whole utterance.

    AND: frames with identical G-tuples share a partition. OR: connected
    components of the share-at-least-one-index graph (pairwise OR-equality is
    not transitive; the transitive closure via union-find defines the
    partition). Sharing any (group, index) pair links all its frames, so the
    closure is computed per group without enumerating frame pairs.
    """
    Q = np.asarray(Q)
    T = Q.shape[0]
    if T < 1:
        raise ValueError("Q must have at least one frame")
    if mode is EqualityMode.AND:
        groups: dict[tuple[int, ...], list[int]] = {}
        for t in range(T):
            groups.setdefault(tuple(int(x) for x in Q[t]), []).append(t)
        parts = [np.asarray(members) for members in groups.values()]
    else:
        uf = _UnionFind(T)
        for g in range(Q.shape[1]):
            first_with: dict[int, int] = {}
            for t in range(T):
                v = int(Q[t, g])
                if v in first_with:
                    uf.union(first_with[v], t)
                else:
                    first_with[v] = t
        comps: dict[int, list[int]] = {}
        for t in range(T):
            comps.setdefault(uf.find(t), []).append(t)
        parts = [np.asarray(members) for members in comps.values()]
    parts.sort(key=lambda p: int(p[0]))
    return FramePartition(parts, T)


def partition_weights(partition: FramePartition) -> PoolingWeights:
    """Eq-5 weighting: w_t = 1/|P(t)| with zeta = 1/|S(Q)|."""
    sizes = partition.member_sizes()
    return PoolingWeights(weights=1.0 / sizes.astype(np.float64),
                          zeta=1.0 / len(partition))


def pool_squashed(C: np.ndarray, partition: FramePartition) -> np.ndarray:
    """Average within each partition, then average across partitions."""
    C = np.asarray(C)
    if C.shape[0] != partition.n_frames:
        raise ValueError(f"C has {C.shape[0]} frames, partition covers {partition.n_frames}")
    return pool_weighted(C, partition_weights(partition))


def _tuple_counts_for(Q: np.ndarray, counts: CodebookCounts) -> np.ndarray:
    return np.array([counts.tuple_counts.get(tuple(int(x) for x in row), 0) for row in Q],
                    dtype=np.float64)


def raw_weights_sif(Q: np.ndarray, counts: CodebookCounts, a: float = DEFAULT_SIF_A,
                    normalize_counts: bool = False) -> np.ndarray:
    """w_t = a / (a + N(q_t)); unseen tuples get N = 0, hence w_t = 1.

    With normalize_counts the raw count is replaced by the relative frequency
    N(q_t) / total_frames, as in the original sentence-embedding formulation.
    """
    if a <= 0:
        raise ValueError(f"smoothing a must be > 0, got {a}")
    n = _tuple_counts_for(np.asarray(Q), counts)
    if normalize_counts:
        n = n / max(counts.total_frames, 1)
    return a / (a + n)


def raw_weights_gp(Q: np.ndarray, counts: CodebookCounts) -> np.ndarray:
    """w_t = 1 / sum_g N_g(q_t^g); all-unseen frames fall back to w_t = 1."""
    Q = np.asarray(Q)
    denom = np.zeros(Q.shape[0], dtype=np.float64)
    for g in range(Q.shape[1]):
        denom += counts.group_counts[g, Q[:, g].astype(np.int64)]
    w = np.ones_like(denom)
    seen = denom > 0
    w[seen] = 1.0 / denom[seen]
    return w


def raw_weights_lp(Q: np.ndarray) -> np.ndarray:
    """GP formula with counts taken from the instance's own frames only."""
    Q = np.asarray(Q)
    if Q.shape[0] < 1:
        raise ValueError("Q must have at least one frame")
    denom = np.zeros(Q.shape[0], dtype=np.float64)
    for g in range(Q.shape[1]):
        col = Q[:, g]
        _, inverse, cnt = np.unique(col, return_inverse=True, return_counts=True)
        denom += cnt[inverse]
    return 1.0 / denom


def raw_weights_bp(Q: np.ndarray, counts: CodebookCounts) -> np.ndarray:
    """Elementwise product of raw LP and raw GP weights."""
    return raw_weights_lp(Q) * raw_weights_gp(Q, counts)


def weights_sif(Q: np.ndarray, counts: CodebookCounts, a: float = DEFAULT_SIF_A,
                normalize_counts: bool = False) -> PoolingWeights:
    return normalize_weights(raw_weights_sif(Q, counts, a, normalize_counts))


def weights_gp(Q: np.ndarray, counts: CodebookCounts) -> PoolingWeights:
    return normalize_weights(raw_weights_gp(Q, counts))


def weights_lp(Q: np.ndarray) -> PoolingWeights:
    return normalize_weights(raw_weights_lp(Q))


def weights_bp(Q: np.ndarray, counts: CodebookCounts) -> PoolingWeights:
    return normalize_weights(raw_weights_bp(Q, counts))
