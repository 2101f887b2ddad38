"""Corpus-level post-pooling transforms: whitening and SoftDecay.

Both are backed by an in-house one-sided (Hestenes) Jacobi SVD; symmetric
positive-semidefinite inputs make it double as the eigendecomposition used
for whitening.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .formats import FormatError

WHITENING_MAGIC = b"SPW1"
WHITENING_EPS = 1e-9   # eigenvalue floor
SVD_TOL = 1e-10
DEFAULT_SOFT_DECAY_ALPHA = -0.6


class NumericalError(RuntimeError):
    """Iterative routine failed to converge within its iteration cap."""


class ParameterError(ValueError):
    """Transform parameter outside its valid domain for the given input."""


def _complete_orthonormal(U: np.ndarray, cols: list[int]) -> None:
    """Fill the listed (near-zero) columns of U with orthonormal complements."""
    n = U.shape[0]
    filled = [j for j in range(U.shape[1]) if j not in cols]
    basis = [U[:, j] for j in filled]
    cand = 0
    for j in cols:
        while True:
            if cand >= n:
                raise NumericalError("failed to complete orthonormal basis")
            v = np.zeros(n)
            v[cand] = 1.0
            cand += 1
            for _ in range(2):  # two Gram-Schmidt passes for stability
                for b in basis:
                    v -= (b @ v) * b
            norm = np.linalg.norm(v)
            if norm > 1e-3:
                v /= norm
                break
        U[:, j] = v
        basis.append(v)


def _round_robin_pairs(d: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Tournament schedule: d-1 batches of disjoint column pairs covering all
    d(d-1)/2 pairs, enabling vectorized simultaneous Jacobi rotations."""
    m = d if d % 2 == 0 else d + 1
    players = list(range(m))
    batches = []
    for _ in range(max(m - 1, 0)):
        ps, qs = [], []
        for i in range(m // 2):
            a, b = players[i], players[m - 1 - i]
            if a < d and b < d:
                ps.append(min(a, b))
                qs.append(max(a, b))
        if ps:
            batches.append((np.array(ps), np.array(qs)))
        players = [players[0], players[-1]] + players[1:-1]
    return batches


def svd(X: np.ndarray, tol: float = SVD_TOL) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD via one-sided Jacobi rotations: X = U @ diag(s) @ V.T.

    Singular values are returned non-increasing; U and V have orthonormal
    columns. Sign convention: the largest-magnitude component of each right
    singular vector is positive.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.size == 0:
        raise ValueError(f"X must be a nonempty 2-D matrix, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("X contains NaN/Inf")
    n, d = X.shape
    if n < d:
        V, s, U = svd(X.T, tol=tol)
        return U, s, V

    B = np.array(X)
    Vm = np.eye(d)
    max_sweeps = 100 * max(n, d)
    batches = _round_robin_pairs(d)
    for _ in range(max_sweeps):
        rotated = False
        for ps, qs in batches:
            # disjoint column pairs: all rotations in a batch commute
            Bp = B[:, ps]
            Bq = B[:, qs]
            alpha = np.einsum("ij,ij->j", Bp, Bp)
            beta = np.einsum("ij,ij->j", Bq, Bq)
            gamma = np.einsum("ij,ij->j", Bp, Bq)
            live = np.abs(gamma) > tol * np.sqrt(alpha * beta)
            if not live.any():
                continue
            rotated = True
            ps = ps[live]
            qs = qs[live]
            zeta = (beta[live] - alpha[live]) / (2.0 * gamma[live])
            t = np.sign(zeta) / (np.abs(zeta) + np.hypot(1.0, zeta))
            t[zeta == 0.0] = 1.0
            c = 1.0 / np.hypot(1.0, t)
            s = c * t
            Bp = B[:, ps]
            Bq = B[:, qs]
            B[:, ps] = c * Bp - s * Bq
            B[:, qs] = s * Bp + c * Bq
            Vp = Vm[:, ps]
            Vq = Vm[:, qs]
            Vm[:, ps] = c * Vp - s * Vq
            Vm[:, qs] = s * Vp + c * Vq
        if not rotated:
            break
    else:
        raise NumericalError(f"Jacobi SVD did not converge within {max_sweeps} sweeps")

    sigma = np.linalg.norm(B, axis=0)
    order = np.argsort(-sigma, kind="stable")
    sigma = sigma[order]
    B = B[:, order]
    Vm = Vm[:, order]
    U = np.zeros_like(B)
    scale = sigma[0] if sigma[0] > 0 else 1.0
    null_cols = []
    for j in range(d):
        if sigma[j] > scale * 1e-13:
            U[:, j] = B[:, j] / sigma[j]
        else:
            null_cols.append(j)
    if null_cols:
        _complete_orthonormal(U, null_cols)
    for j in range(d):
        k = int(np.argmax(np.abs(Vm[:, j])))
        if Vm[k, j] < 0:
            Vm[:, j] = -Vm[:, j]
            U[:, j] = -U[:, j]
    return U, sigma, Vm


@dataclass(frozen=True)
class WhiteningModel:
    mean: np.ndarray       # (D,)
    transform: np.ndarray  # (D, D)

    @property
    def D(self) -> int:
        return self.mean.shape[0]


def fit_whitening(X: np.ndarray, eps: float = WHITENING_EPS) -> WhiteningModel:
    """Fit y = (x - mu) @ W such that the fitted set has identity covariance.

    W = U diag((lambda + eps)^(-1/2)) from the eigendecomposition of the
    biased covariance; eps floors near-zero eigenvalues of rank-deficient data.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise ValueError(f"need at least 2 samples, got shape {X.shape}")
    if not np.isfinite(X).all():
        raise ValueError("X contains NaN/Inf")
    mu = X.mean(axis=0)
    Xc = X - mu
    cov = (Xc.T @ Xc) / X.shape[0]
    U, lam, _ = svd(cov)
    W = U * (lam + eps) ** -0.5
    return WhiteningModel(mean=mu, transform=W)


def apply_whitening(model: WhiteningModel, x: np.ndarray) -> np.ndarray:
    """(x - mu) @ W for a single vector or a stack of row vectors."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.D:
        raise ValueError(f"dimension mismatch: input {x.shape[-1]}, model {model.D}")
    return (x - model.mean) @ model.transform


@dataclass(frozen=True)
class SoftDecayParams:
    alpha: float = DEFAULT_SOFT_DECAY_ALPHA


def soft_exponential(x: np.ndarray, alpha: float) -> np.ndarray:
    """Soft-exponential family: identity at alpha = 0, log-like for alpha < 0."""
    x = np.asarray(x, dtype=np.float64)
    if alpha == 0.0:
        return x.copy()
    if alpha < 0.0:
        arg = 1.0 - alpha * (x + alpha)
        if (arg <= 0.0).any():
            raise ParameterError(f"alpha={alpha} leaves the soft-exponential domain "
                                 f"for singular value {float(x[arg <= 0.0][0]):g}")
        return -np.log(arg) / alpha
    with np.errstate(over="raise"):
        try:
            return (np.exp(alpha * x) - 1.0) / alpha + alpha
        except FloatingPointError:
            raise ParameterError(f"alpha={alpha} overflows for the observed singular values") from None


def soft_decay_transform(X: np.ndarray, params: SoftDecayParams) -> np.ndarray:
    """Reduce singular-value skew: map sigma through the soft-exponential and
    rescale so the top singular value is preserved."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError(f"X must be a nonempty 2-D matrix, got shape {X.shape}")
    if params.alpha == 0.0:
        return X.copy()
    U, sigma, V = svd(X)
    if sigma[0] == 0.0:
        return X.copy()
    mapped = soft_exponential(sigma, params.alpha)
    if mapped[0] <= 0.0:
        raise ParameterError(f"alpha={params.alpha} maps the top singular value to "
                             f"{mapped[0]:g}; rescaling is undefined")
    sigma_new = mapped * (sigma[0] / mapped[0])
    return (U * sigma_new) @ V.T


def write_whitening(model: WhiteningModel, stream: BinaryIO) -> None:
    stream.write(WHITENING_MAGIC)
    stream.write(struct.pack("<I", model.D))
    stream.write(model.mean.astype("<f8").tobytes())
    stream.write(np.ascontiguousarray(model.transform, dtype="<f8").tobytes())


def read_whitening(stream: BinaryIO) -> WhiteningModel:
    magic = stream.read(4)
    if magic != WHITENING_MAGIC:
        raise FormatError(f"bad whitening magic {magic!r}, expected {WHITENING_MAGIC!r}", 0)
    raw = stream.read(4)
    if len(raw) != 4:
        raise FormatError("truncated whitening header", 4)
    D = struct.unpack("<I", raw)[0]
    body = stream.read(D * 8 + D * D * 8)
    if len(body) != D * 8 + D * D * 8:
        raise FormatError("truncated whitening model", 8)
    mean = np.frombuffer(body[: D * 8], dtype="<f8").copy()
    W = np.frombuffer(body[D * 8:], dtype="<f8").reshape(D, D).copy()
    return WhiteningModel(mean=mean, transform=W)


def save_whitening(path: str | Path, model: WhiteningModel) -> None:
    with open(path, "wb") as f:
        write_whitening(model, f)


def load_whitening(path: str | Path) -> WhiteningModel:
    with open(path, "rb") as f:
        return read_whitening(f)
