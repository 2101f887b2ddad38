"""Weighted-sum pooling engine and the non-VQ baselines (average, statistics).

Pooling is the weighted sum sum_t zeta * w_t * C_t where the normalizer zeta
makes the effective weights sum to 1. Accumulation is in float64; outputs are
emitted as float32.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

STD_EPS = 1e-10  # inside the sqrt of statistics pooling


class WeightError(ValueError):
    """Invalid raw weights (negative, non-finite, or all zero)."""


@dataclass(frozen=True)
class PoolingWeights:
    """Nonnegative per-frame weights plus the normalizer zeta.

    Invariant: zeta * sum(weights) == 1 (within 1e-6 relative).
    """

    weights: np.ndarray  # (T,) float64, >= 0, at least one > 0
    zeta: float

    @property
    def T(self) -> int:
        return self.weights.shape[0]

    def probabilities(self) -> np.ndarray:
        """Effective weights zeta * w_t; a probability vector over frames."""
        return self.zeta * self.weights


def normalize_weights(raw: np.ndarray) -> PoolingWeights:
    """Wrap raw nonnegative weights with zeta = 1 / sum(raw)."""
    w = np.asarray(raw, dtype=np.float64)
    if w.ndim != 1 or w.shape[0] < 1:
        raise WeightError(f"weights must be a nonempty 1-D vector, got shape {w.shape}")
    if not np.isfinite(w).all():
        raise WeightError("weights contain NaN/Inf")
    if (w < 0).any():
        raise WeightError("weights must be nonnegative")
    total = float(w.sum())
    if total <= 0.0:
        raise WeightError("weights are all zero")
    return PoolingWeights(weights=w, zeta=1.0 / total)


def pool_weighted(C: np.ndarray, w: PoolingWeights) -> np.ndarray:
    """sum_t zeta * w_t * C_t -> (F,) float32."""
    C64 = np.asarray(C, dtype=np.float64)
    if C64.ndim != 2:
        raise ValueError(f"C must be 2-D (T x F), got shape {C64.shape}")
    if w.T != C64.shape[0]:
        raise ValueError(f"weight length {w.T} != frame count {C64.shape[0]}")
    pooled = w.probabilities() @ C64
    if not np.isfinite(pooled).all():
        raise ValueError("pooled output is not finite")
    return pooled.astype(np.float32)


def pool_average(C: np.ndarray) -> np.ndarray:
    """Mean over frames; identical summation order to uniform pool_weighted."""
    C = np.asarray(C)
    return pool_weighted(C, normalize_weights(np.ones(C.shape[0])))


def pool_statistics(C: np.ndarray) -> np.ndarray:
    """Concatenated per-dimension mean and population standard deviation -> (2F,)."""
    C64 = np.asarray(C, dtype=np.float64)
    if C64.ndim != 2 or C64.shape[0] < 1:
        raise ValueError(f"C must be a nonempty 2-D matrix, got shape {C64.shape}")
    mu = C64.mean(axis=0)
    var = np.mean((C64 - mu) ** 2, axis=0)
    std = np.sqrt(var + STD_EPS)
    return np.concatenate([mu, std]).astype(np.float32)
