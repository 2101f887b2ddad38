"""Pooling-method configuration and per-utterance dispatch."""
from __future__ import annotations

import enum
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import pooling, vq
from .formats import PooledEmbedding, UtteranceRecord
from .pooling import PoolingWeights
from .vq import CodebookCounts, EqualityMode


class MethodKind(enum.Enum):
    AP = "ap"
    SP = "sp"
    SQUASH = "squash"
    ALLSQUASH = "allsquash"
    SIF = "sif"
    GP = "gp"
    LP = "lp"
    BP = "bp"


_PARTITION_KINDS = {MethodKind.SQUASH, MethodKind.ALLSQUASH}
_COUNT_KINDS = {MethodKind.SIF, MethodKind.GP, MethodKind.BP}


class MethodConfigError(ValueError):
    """Method/parameter combination is invalid."""


class UnsupportedMethodError(ValueError):
    """Operation not defined for this method (e.g. frame weights of SP)."""


@dataclass(frozen=True)
class PoolingMethod:
    kind: MethodKind
    equality: EqualityMode | None = None
    sif_a: float = vq.DEFAULT_SIF_A
    sif_normalize: bool = False

    def __post_init__(self) -> None:
        if self.equality is not None and self.kind not in _PARTITION_KINDS:
            raise MethodConfigError(f"equality mode is only valid with squash/allsquash, "
                                    f"not {self.kind.value}")
        if self.sif_a <= 0:
            raise MethodConfigError(f"sif_a must be > 0, got {self.sif_a}")

    @property
    def needs_counts(self) -> bool:
        return self.kind in _COUNT_KINDS

    @property
    def equality_mode(self) -> EqualityMode:
        return self.equality if self.equality is not None else EqualityMode.AND

    def output_dim(self, F: int) -> int:
        return 2 * F if self.kind is MethodKind.SP else F


def parse_method(name: str, equality: str | None = None, sif_a: float = vq.DEFAULT_SIF_A,
                 sif_normalize: bool = False) -> PoolingMethod:
    try:
        kind = MethodKind(name.lower())
    except ValueError:
        raise MethodConfigError(f"unknown pooling method {name!r}; choose from "
                                f"{[m.value for m in MethodKind]}") from None
    eq = None
    if kind in _PARTITION_KINDS:
        eq = EqualityMode(equality.lower()) if equality else EqualityMode.AND
    elif equality:
        raise MethodConfigError(f"--equality is only valid with squash/allsquash, not {name}")
    return PoolingMethod(kind=kind, equality=eq, sif_a=sif_a, sif_normalize=sif_normalize)


def frame_weights(record: UtteranceRecord, method: PoolingMethod,
                  counts: CodebookCounts | None = None) -> PoolingWeights:
    """Per-frame pooling weights for weight-producing methods."""
    kind = method.kind
    if kind is MethodKind.AP:
        return pooling.normalize_weights(np.ones(record.T))
    if kind is MethodKind.SQUASH:
        return vq.partition_weights(vq.squash_partition(record.Q, method.equality_mode))
    if kind is MethodKind.ALLSQUASH:
        return vq.partition_weights(vq.allsquash_partition(record.Q, method.equality_mode))
    if kind is MethodKind.LP:
        return vq.weights_lp(record.Q)
    if method.needs_counts:
        if counts is None:
            raise MethodConfigError(f"method {kind.value} requires codebook counts")
        if kind is MethodKind.SIF:
            return vq.weights_sif(record.Q, counts, method.sif_a, method.sif_normalize)
        if kind is MethodKind.GP:
            return vq.weights_gp(record.Q, counts)
        return vq.weights_bp(record.Q, counts)
    raise UnsupportedMethodError(f"method {kind.value} does not produce frame weights")


def pool_record(record: UtteranceRecord, method: PoolingMethod,
                counts: CodebookCounts | None = None) -> np.ndarray:
    if method.kind is MethodKind.SP:
        return pooling.pool_statistics(record.C)
    return pooling.pool_weighted(record.C, frame_weights(record, method, counts))


def pool_records(records: Sequence[UtteranceRecord], method: PoolingMethod,
                 counts: CodebookCounts | None = None,
                 threads: int | None = None) -> list[PooledEmbedding]:
    """Pool every utterance; output order follows dataset order."""
    if method.needs_counts and counts is None:
        raise MethodConfigError(f"method {method.kind.value} requires codebook counts")

    def one(record: UtteranceRecord) -> PooledEmbedding:
        return PooledEmbedding(record.id, record.label, pool_record(record, method, counts))

    if threads is None or threads <= 1 or len(records) < 2:
        return [one(rec) for rec in records]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(one, records))
