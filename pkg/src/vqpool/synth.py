"""Synthetic dataset generator for oracle-verified testing.

Each class owns a few "keyword" quantizer tuples with class-specific frame
centroids; all classes share a small pool of "filler" tuples (silence-like
frames). Filler frames dominate utterances at high filler fractions, so plain
averaging is biased towards the shared filler centroids while count-based
weighting recovers the class signal. Tuple assignment is round-robin, which
makes filler tuples the globally most frequent ones by construction.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .formats import DatasetHeader, UtteranceRecord

_SPLIT_CODES = {"train": 0, "test": 1}
_FILLER_JITTER = 0.15   # per-utterance spread of the filler fraction
_FILLER_SCALE = 2.0     # filler centroids are louder than keyword offsets


@dataclass(frozen=True)
class SyntheticSpec:
    classes: int = 10
    utterances_per_class: int = 50
    F: int = 16
    G: int = 2
    V: int = 64
    t_min: int = 20
    t_max: int = 100
    filler_fraction: float = 0.8
    noise_scale: float = 1.5
    seed: int = 0
    filler_tuples: int = 3
    keywords_per_class: int = 5

    def validate(self) -> None:
        if self.classes < 1:
            raise ValueError("classes must be >= 1")
        if self.utterances_per_class < 1:
            raise ValueError("utterances_per_class must be >= 1")
        if self.F < 1 or self.G < 1:
            raise ValueError("F and G must be >= 1")
        if not 1 <= self.t_min <= self.t_max:
            raise ValueError("need 1 <= t_min <= t_max")
        if not 0.0 <= self.filler_fraction < 1.0:
            raise ValueError("filler_fraction must be in [0, 1)")
        if self.noise_scale < 0:
            raise ValueError("noise_scale must be >= 0")
        if self.filler_tuples < 1 or self.keywords_per_class < 1:
            raise ValueError("filler_tuples and keywords_per_class must be >= 1")
        needed = self.filler_tuples + self.classes * self.keywords_per_class
        if self.V < needed:
            raise ValueError(f"V={self.V} too small: need >= {needed} distinct indices")
        if self.V > 0xFFFF + 1:
            raise ValueError(f"V={self.V} exceeds uint16 range")

    def keyword_index(self, cls: int, kw: int) -> int:
        return self.filler_tuples + cls * self.keywords_per_class + kw

    def header(self, n_records: int) -> DatasetHeader:
        return DatasetHeader(F=self.F, G=self.G, V=self.V, L=self.classes, N=n_records)


def _centroids(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic filler and keyword centroids shared across splits."""
    rng = np.random.default_rng([spec.seed, 0xC3])
    filler = rng.normal(0.0, _FILLER_SCALE, (spec.filler_tuples, spec.F))
    class_base = rng.normal(0.0, 1.0, (spec.classes, spec.F))
    kw_offsets = rng.normal(0.0, 0.3, (spec.classes, spec.keywords_per_class, spec.F))
    keyword = class_base[:, None, :] + kw_offsets
    return filler, keyword


def generate_synthetic(spec: SyntheticSpec, split: str = "train") -> list[UtteranceRecord]:
    """Generate one split. Centroids depend only on the seed, so train and
    test come from the same generative process with disjoint utterance ids."""
    spec.validate()
    if split not in _SPLIT_CODES:
        raise ValueError(f"split must be one of {sorted(_SPLIT_CODES)}, got {split!r}")
    filler_cent, keyword_cent = _centroids(spec)
    rng = np.random.default_rng([spec.seed, 0xF7, _SPLIT_CODES[split]])
    records: list[UtteranceRecord] = []
    filler_cursor = 0
    kw_cursor = [0] * spec.classes
    for cls in range(spec.classes):
        for u in range(spec.utterances_per_class):
            T = int(rng.integers(spec.t_min, spec.t_max + 1))
            frac = spec.filler_fraction
            if frac > 0.0:
                # silence length varies per utterance; this is what biases
                # plain averaging while leaving count-based weights intact
                lo = max(0.0, frac - _FILLER_JITTER)
                hi = min(0.95, frac + _FILLER_JITTER)
                frac = float(rng.uniform(lo, hi))
            n_filler = min(int(round(frac * T)), T - 1)
            tuple_ids = np.empty(T, dtype=np.int64)
            centroids = np.empty((T, spec.F))
            slots = rng.permutation(T)
            for s in slots[:n_filler]:
                f = filler_cursor % spec.filler_tuples
                filler_cursor += 1
                tuple_ids[s] = f
                centroids[s] = filler_cent[f]
            for s in slots[n_filler:]:
                kw = kw_cursor[cls] % spec.keywords_per_class
                kw_cursor[cls] += 1
                tuple_ids[s] = spec.keyword_index(cls, kw)
                centroids[s] = keyword_cent[cls, kw]
            C = centroids + spec.noise_scale * rng.normal(0.0, 1.0, (T, spec.F))
            Q = np.repeat(tuple_ids[:, None], spec.G, axis=1).astype(np.uint16)
            records.append(UtteranceRecord(
                id=f"{split}-c{cls:03d}-u{u:04d}",
                label=cls,
                C=C.astype(np.float32),
                Q=Q,
            ))
    return records


def label_names(spec: SyntheticSpec) -> list[str]:
    return [f"class{c}" for c in range(spec.classes)]
