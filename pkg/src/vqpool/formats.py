"""Binary file formats: "SPD1" frame datasets and "SPE1" pooled embeddings.

All integers are little-endian. Quantized indices are stored 0-based,
i.e. every Q entry lies in [0, V). Matrices are frame-major (row = frame).
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import BinaryIO, Iterator, Sequence

import numpy as np

DATASET_MAGIC = b"SPD1"
EMBEDDING_MAGIC = b"SPE1"
FORMAT_VERSION = 1

_DATASET_HEADER = struct.Struct("<4sIIIIIQ")   # magic, version, F, G, V, L, N
_EMBEDDING_HEADER = struct.Struct("<4sIIIQ")   # magic, version, D, L, N
_U32 = struct.Struct("<I")


class FormatError(ValueError):
    """Malformed, corrupt, or truncated byte stream."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class ValidationError(ValueError):
    """A record or header violating a format invariant."""


@dataclass(frozen=True)
class DatasetHeader:
    F: int
    G: int
    V: int
    L: int
    N: int
    version: int = FORMAT_VERSION

    def validate(self) -> None:
        for name in ("F", "G", "V", "L"):
            if getattr(self, name) < 1:
                raise ValidationError(f"header field {name} must be >= 1, got {getattr(self, name)}")
        if self.N < 0:
            raise ValidationError(f"header field N must be >= 0, got {self.N}")
        if self.version != FORMAT_VERSION:
            raise ValidationError(f"unsupported version {self.version}")
        if self.V > 0xFFFF + 1:
            raise ValidationError(f"V={self.V} exceeds uint16 index range")


@dataclass
class UtteranceRecord:
    """One utterance: frame matrix C (T x F), quantized indices Q (T x G)."""

    id: str
    label: int
    C: np.ndarray  # (T, F) float32
    Q: np.ndarray  # (T, G) uint16

    def __post_init__(self) -> None:
        self.C = np.ascontiguousarray(self.C, dtype=np.float32)
        self.Q = np.ascontiguousarray(self.Q, dtype=np.uint16)

    @property
    def T(self) -> int:
        return self.C.shape[0]

    def validate(self, header: DatasetHeader) -> None:
        if self.C.ndim != 2 or self.Q.ndim != 2:
            raise ValidationError(f"record {self.id!r}: C and Q must be 2-D")
        if self.C.shape[0] != self.Q.shape[0]:
            raise ValidationError(f"record {self.id!r}: C has {self.C.shape[0]} frames but Q has {self.Q.shape[0]}")
        if self.T < 1:
            raise ValidationError(f"record {self.id!r}: T must be >= 1")
        if self.C.shape[1] != header.F:
            raise ValidationError(f"record {self.id!r}: C feature dim {self.C.shape[1]} != header F={header.F}")
        if self.Q.shape[1] != header.G:
            raise ValidationError(f"record {self.id!r}: Q group dim {self.Q.shape[1]} != header G={header.G}")
        if not (0 <= self.label < header.L):
            raise ValidationError(f"record {self.id!r}: label {self.label} outside [0, {header.L})")
        if self.Q.size and int(self.Q.max()) >= header.V:
            raise ValidationError(f"record {self.id!r}: Q contains index {int(self.Q.max())} >= V={header.V}")
        if not np.isfinite(self.C).all():
            raise ValidationError(f"record {self.id!r}: C contains NaN/Inf")

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, UtteranceRecord):
            return NotImplemented
        return (
            self.id == other.id
            and self.label == other.label
            and self.C.shape == other.C.shape
            and self.Q.shape == other.Q.shape
            and np.array_equal(self.C, other.C)
            and np.array_equal(self.Q, other.Q)
        )


@dataclass
class PooledEmbedding:
    id: str
    label: int
    vector: np.ndarray  # (D,) float32

    def __post_init__(self) -> None:
        self.vector = np.ascontiguousarray(self.vector, dtype=np.float32)

    @property
    def D(self) -> int:
        return self.vector.shape[0]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PooledEmbedding):
            return NotImplemented
        return (
            self.id == other.id
            and self.label == other.label
            and np.array_equal(self.vector, other.vector)
        )


@dataclass(frozen=True)
class EmbeddingHeader:
    D: int
    L: int
    N: int
    version: int = FORMAT_VERSION


def _read_exact(stream: BinaryIO, n: int, offset: int, what: str) -> bytes:
    buf = stream.read(n)
    if len(buf) != n:
        raise FormatError(f"truncated stream while reading {what}: wanted {n} bytes, got {len(buf)}", offset)
    return buf


def write_dataset(records: Sequence[UtteranceRecord], header: DatasetHeader, stream: BinaryIO) -> None:
    """Write an SPD1 dataset. N in the written header equals len(records)."""
    header = DatasetHeader(header.F, header.G, header.V, header.L, len(records), header.version)
    header.validate()
    for rec in records:
        rec.validate(header)
    stream.write(_DATASET_HEADER.pack(DATASET_MAGIC, header.version, header.F, header.G,
                                      header.V, header.L, header.N))
    for rec in records:
        id_bytes = rec.id.encode("utf-8")
        stream.write(_U32.pack(len(id_bytes)))
        stream.write(id_bytes)
        stream.write(struct.pack("<II", rec.label, rec.T))
        stream.write(rec.C.astype("<f4", copy=False).tobytes())
        stream.write(rec.Q.astype("<u2", copy=False).tobytes())


def read_dataset(stream: BinaryIO) -> tuple[DatasetHeader, Iterator[UtteranceRecord]]:
    """Open an SPD1 stream. Records are parsed lazily by the returned iterator."""
    raw = _read_exact(stream, _DATASET_HEADER.size, 0, "dataset header")
    magic, version, F, G, V, L, N = _DATASET_HEADER.unpack(raw)
    if magic != DATASET_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {DATASET_MAGIC!r}", 0)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    header = DatasetHeader(F, G, V, L, N, version)
    header.validate()

    def _records() -> Iterator[UtteranceRecord]:
        offset = _DATASET_HEADER.size
        for i in range(N):
            try:
                id_len = _U32.unpack(_read_exact(stream, 4, offset, "id length"))[0]
                offset += 4
                rec_id = _read_exact(stream, id_len, offset, "id bytes").decode("utf-8")
                offset += id_len
                label, T = struct.unpack("<II", _read_exact(stream, 8, offset, "label/T"))
                offset += 8
                c_bytes = T * F * 4
                C = np.frombuffer(_read_exact(stream, c_bytes, offset, "C matrix"),
                                  dtype="<f4").reshape(T, F)
                offset += c_bytes
                q_bytes = T * G * 2
                Q = np.frombuffer(_read_exact(stream, q_bytes, offset, "Q matrix"),
                                  dtype="<u2").reshape(T, G)
                offset += q_bytes
            except FormatError as exc:
                raise FormatError(f"record {i}: {exc.args[0]}") from None
            rec = UtteranceRecord(rec_id, label, C.copy(), Q.copy())
            try:
                rec.validate(header)
            except ValidationError as exc:
                raise FormatError(f"record {i}: {exc}") from None
            yield rec

    return header, _records()


def write_embeddings(embeddings: Sequence[PooledEmbedding], L: int, stream: BinaryIO,
                     D: int | None = None) -> None:
    """Write an SPE1 embedding file. All records must share one dimension D."""
    if D is None:
        D = embeddings[0].D if embeddings else 0
    for emb in embeddings:
        if emb.D != D:
            raise ValidationError(f"embedding {emb.id!r}: dimension {emb.D} != expected D={D}")
        if not np.isfinite(emb.vector).all():
            raise ValidationError(f"embedding {emb.id!r}: vector contains NaN/Inf")
        if not (0 <= emb.label < L):
            raise ValidationError(f"embedding {emb.id!r}: label {emb.label} outside [0, {L})")
    stream.write(_EMBEDDING_HEADER.pack(EMBEDDING_MAGIC, FORMAT_VERSION, D, L, len(embeddings)))
    for emb in embeddings:
        id_bytes = emb.id.encode("utf-8")
        stream.write(_U32.pack(len(id_bytes)))
        stream.write(id_bytes)
        stream.write(_U32.pack(emb.label))
        stream.write(emb.vector.astype("<f4", copy=False).tobytes())


def read_embeddings(stream: BinaryIO) -> tuple[EmbeddingHeader, list[PooledEmbedding]]:
    raw = _read_exact(stream, _EMBEDDING_HEADER.size, 0, "embedding header")
    magic, version, D, L, N = _EMBEDDING_HEADER.unpack(raw)
    if magic != EMBEDDING_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {EMBEDDING_MAGIC!r}", 0)
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}", 4)
    header = EmbeddingHeader(D, L, N, version)
    out: list[PooledEmbedding] = []
    offset = _EMBEDDING_HEADER.size
    for i in range(N):
        try:
            id_len = _U32.unpack(_read_exact(stream, 4, offset, "id length"))[0]
            offset += 4
            emb_id = _read_exact(stream, id_len, offset, "id bytes").decode("utf-8")
            offset += id_len
            label = _U32.unpack(_read_exact(stream, 4, offset, "label"))[0]
            offset += 4
            vec = np.frombuffer(_read_exact(stream, D * 4, offset, "vector"), dtype="<f4").copy()
            offset += D * 4
        except FormatError as exc:
            raise FormatError(f"embedding record {i}: {exc.args[0]}") from None
        if label >= L:
            raise FormatError(f"embedding record {i}: label {label} outside [0, {L})")
        out.append(PooledEmbedding(emb_id, label, vec))
    return header, out


# Path-level helpers.

def save_dataset(path: str | Path, records: Sequence[UtteranceRecord], header: DatasetHeader) -> None:
    with open(path, "wb") as f:
        write_dataset(records, header, f)


def load_dataset(path: str | Path) -> tuple[DatasetHeader, list[UtteranceRecord]]:
    with open(path, "rb") as f:
        header, it = read_dataset(f)
        return header, list(it)


def save_embeddings(path: str | Path, embeddings: Sequence[PooledEmbedding], L: int,
                    D: int | None = None) -> None:
    with open(path, "wb") as f:
        write_embeddings(embeddings, L, f, D=D)


def load_embeddings(path: str | Path) -> tuple[EmbeddingHeader, list[PooledEmbedding]]:
    with open(path, "rb") as f:
        return read_embeddings(f)


def labels_sidecar_path(dataset_path: str | Path) -> Path:
    return Path(str(dataset_path) + ".labels.txt")


def save_label_names(dataset_path: str | Path, names: Sequence[str]) -> None:
    labels_sidecar_path(dataset_path).write_text("\n".join(names) + "\n", encoding="utf-8")


def load_label_names(dataset_path: str | Path) -> list[str] | None:
    p = labels_sidecar_path(dataset_path)
    if not p.exists():
        return None
    return p.read_text(encoding="utf-8").splitlines()
