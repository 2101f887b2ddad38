"""Self-contained SPD1 writer/validator.

Implements the published SPD1 byte layout directly so this package depends on
the dataset *format*, not on the consumer's internals. All integers are
little-endian; quantized indices are stored 0-based.

Layout:
    header  <4sIIIIIQ>  magic b"SPD1", version=1, F, G, V, L, N
    record  u32 id_len | id utf-8 | u32 label | u32 T | T*F f32 C | T*G u16 Q
"""
from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path
from typing import BinaryIO, Iterator, Sequence

import numpy as np

MAGIC = b"SPD1"
VERSION = 1
_HEADER = struct.Struct("<4sIIIIIQ")
_U32 = struct.Struct("<I")


class Spd1Error(ValueError):
    """Malformed stream or invariant violation."""


@dataclass(frozen=True)
class Header:
    F: int
    G: int
    V: int
    L: int
    N: int


@dataclass
class Record:
    id: str
    label: int
    C: np.ndarray  # (T, F) float32
    Q: np.ndarray  # (T, G) uint16

    @property
    def T(self) -> int:
        return self.C.shape[0]

    def validate(self, header: Header) -> None:
        if self.T < 1:
            raise Spd1Error(f"record {self.id!r}: T must be >= 1")
        if self.C.shape != (self.T, header.F):
            raise Spd1Error(f"record {self.id!r}: C shape {self.C.shape} != (T, F={header.F})")
        if self.Q.shape != (self.T, header.G):
            raise Spd1Error(f"record {self.id!r}: Q shape {self.Q.shape} != (T, G={header.G})")
        if not (0 <= self.label < header.L):
            raise Spd1Error(f"record {self.id!r}: label {self.label} outside [0, {header.L})")
        if self.Q.size and int(self.Q.max()) >= header.V:
            raise Spd1Error(f"record {self.id!r}: Q index {int(self.Q.max())} >= V={header.V}")
        if not np.isfinite(self.C).all():
            raise Spd1Error(f"record {self.id!r}: C contains NaN/Inf")


def write(records: Sequence[Record], header: Header, stream: BinaryIO) -> None:
    header = Header(header.F, header.G, header.V, header.L, len(records))
    for rec in records:
        rec.validate(header)
    stream.write(_HEADER.pack(MAGIC, VERSION, header.F, header.G,
                              header.V, header.L, header.N))
    for rec in records:
        id_bytes = rec.id.encode("utf-8")
        stream.write(_U32.pack(len(id_bytes)))
        stream.write(id_bytes)
        stream.write(struct.pack("<II", rec.label, rec.T))
        stream.write(np.ascontiguousarray(rec.C, dtype="<f4").tobytes())
        stream.write(np.ascontiguousarray(rec.Q, dtype="<u2").tobytes())


def _read_exact(stream: BinaryIO, n: int, what: str) -> bytes:
    data = stream.read(n)
    if len(data) != n:
        raise Spd1Error(f"truncated stream while reading {what}")
    return data


def read(stream: BinaryIO) -> tuple[Header, Iterator[Record]]:
    magic, version, F, G, V, L, N = _HEADER.unpack(_read_exact(stream, _HEADER.size, "header"))
    if magic != MAGIC:
        raise Spd1Error(f"bad magic {magic!r}")
    if version != VERSION:
        raise Spd1Error(f"unsupported version {version}")
    header = Header(F, G, V, L, N)

    def _records() -> Iterator[Record]:
        for i in range(N):
            id_len = _U32.unpack(_read_exact(stream, 4, f"record {i} id length"))[0]
            rec_id = _read_exact(stream, id_len, f"record {i} id").decode("utf-8")
            label, T = struct.unpack("<II", _read_exact(stream, 8, f"record {i} label/T"))
            C = np.frombuffer(_read_exact(stream, T * F * 4, f"record {i} C"),
                              dtype="<f4").reshape(T, F)
            Q = np.frombuffer(_read_exact(stream, T * G * 2, f"record {i} Q"),
                              dtype="<u2").reshape(T, G)
            rec = Record(rec_id, label, C, Q)
            rec.validate(header)
            yield rec
        if stream.read(1):
            raise Spd1Error("trailing bytes after final record")

    return header, _records()


def save(path: str | Path, records: Sequence[Record], header: Header) -> None:
    with open(path, "wb") as f:
        write(records, header, f)


def labels_sidecar_path(dataset_path: str | Path) -> Path:
    return Path(str(dataset_path) + ".labels.txt")


def save_label_names(dataset_path: str | Path, names: Sequence[str]) -> None:
    labels_sidecar_path(dataset_path).write_text("\n".join(names) + "\n", encoding="utf-8")
