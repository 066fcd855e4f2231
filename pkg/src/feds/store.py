"""FEDS: a fixed-layout binary container for labeled embeddings.

Layout (all integers little-endian, vector components IEEE-754 float32 LE):

    magic           4 bytes  b"FED1"
    dim             u32
    label_count     u32
    labels          label_count * (u32 byte_length + UTF-8 bytes)
    section_count   u32
    sections        section_count * (u8 type, u64 record_count, records)
    crc32           u32      IEEE CRC-32 of every preceding byte

Section record layouts:

    type 1 (samples):          id u64, label_id u32, vector dim*f32
    type 2 (centroids):        label_id u32, member_count u32, vector dim*f32
    type 3 (ivf assignments):  id u64, partition u32

Classification stores are written canonically (label table lexicographic,
samples by id ascending, centroids by label, empty sections omitted), so
logically equal content produces byte-identical files. Files are immutable
after write: the writer goes through a temp file and an atomic rename.

In classification stores the label table holds class labels and every
label_id references it. Index files reuse the same container with the
partition ordinals as the label table (see feds.index).
"""

from __future__ import annotations

import os
import struct
import tempfile
import zlib
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .exceptions import (
    BadLabelRef,
    BadMagic,
    CrcMismatch,
    DuplicateId,
    InconsistentDim,
    StoreError,
    TruncatedFile,
    UnsupportedVersion,
    ValidationError,
)
from .pooling import ClassCentroid
from .vectors import check_vector

MAGIC = b"FED1"
SECTION_SAMPLES = 1
SECTION_CENTROIDS = 2
SECTION_IVF_ASSIGNMENTS = 3

_U64_MAX = (1 << 64) - 1


@dataclass(frozen=True)
class StoredSample:
    id: int
    label_id: int
    vector: np.ndarray


@dataclass(frozen=True)
class StoredCentroid:
    label_id: int
    member_count: int
    vector: np.ndarray


@dataclass(frozen=True)
class IvfAssignment:
    id: int
    partition: int


def _check_id(i: int) -> int:
    i = int(i)
    if not 0 <= i <= _U64_MAX:
        raise ValidationError(f"id {i} out of u64 range")
    return i


def write_container(
    path,
    dim: int,
    labels: Sequence[str],
    samples: Sequence[StoredSample] = (),
    centroids: Sequence[StoredCentroid] = (),
    assignments: Sequence[IvfAssignment] = (),
) -> None:
    """Serialize records in the order given; zero-record sections are omitted."""
    if dim < 1:
        raise InconsistentDim("dim must be positive")
    buf = bytearray()
    buf += MAGIC
    buf += struct.pack("<I", dim)
    buf += struct.pack("<I", len(labels))
    for label in labels:
        raw = label.encode("utf-8")
        buf += struct.pack("<I", len(raw))
        buf += raw
    sections = [
        (SECTION_SAMPLES, samples),
        (SECTION_CENTROIDS, centroids),
        (SECTION_IVF_ASSIGNMENTS, assignments),
    ]
    sections = [(t, recs) for t, recs in sections if len(recs) > 0]
    buf += struct.pack("<I", len(sections))
    for stype, records in sections:
        buf += struct.pack("<BQ", stype, len(records))
        for r in records:
            if stype == SECTION_SAMPLES:
                buf += struct.pack("<QI", _check_id(r.id), r.label_id)
                buf += _vector_bytes(r.vector, dim)
            elif stype == SECTION_CENTROIDS:
                buf += struct.pack("<II", r.label_id, r.member_count)
                buf += _vector_bytes(r.vector, dim)
            else:
                buf += struct.pack("<QI", _check_id(r.id), r.partition)
    buf += struct.pack("<I", zlib.crc32(bytes(buf)) & 0xFFFFFFFF)

    path = os.fspath(path)
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path) or ".", suffix=".feds.tmp")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(buf)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _vector_bytes(vector, dim: int) -> bytes:
    v = check_vector(vector)
    if v.size != dim:
        raise InconsistentDim(f"vector has dim {v.size}, store dim is {dim}")
    return v.astype("<f4").tobytes()


class _Reader:
    """Bounds-checked cursor over the raw file bytes."""

    def __init__(self, buf: bytes):
        self.buf = buf
        self.off = 0

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.buf) - 4:  # last 4 bytes are the CRC
            raise TruncatedFile(f"file ends mid-structure at offset {self.off}")
        out = self.buf[self.off : self.off + n]
        self.off += n
        return out

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def u64(self) -> int:
        return struct.unpack("<Q", self.take(8))[0]


def read_container(path):
    """Parse a FEDS file: (dim, labels, samples, centroids, assignments).

    The raw bytes are structurally parsed and CRC-verified before any
    record is surfaced; corruption raises instead of returning torn data.
    """
    with open(path, "rb") as f:
        buf = f.read()
    if len(buf) < 4:
        raise TruncatedFile("file shorter than magic")
    if buf[:4] != MAGIC:
        if buf[:3] == MAGIC[:3]:
            raise UnsupportedVersion(f"unsupported format version {buf[3:4]!r}")
        raise BadMagic(f"bad magic {buf[:4]!r}")
    if len(buf) < 12:
        raise TruncatedFile("file shorter than fixed header")

    r = _Reader(buf)
    r.off = 4
    dim = r.u32()
    if dim < 1:
        raise StoreError("dim field must be positive")
    raw_labels = []
    for _ in range(r.u32()):
        raw_labels.append(r.take(r.u32()))
    raw_sections = []
    for _ in range(r.u32()):
        stype = r.u8()
        count = r.u64()
        if stype == SECTION_SAMPLES:
            body = r.take(count * (12 + 4 * dim))
        elif stype == SECTION_CENTROIDS:
            body = r.take(count * (8 + 4 * dim))
        elif stype == SECTION_IVF_ASSIGNMENTS:
            body = r.take(count * 12)
        else:
            raise StoreError(f"unknown section type {stype}")
        raw_sections.append((stype, count, body))
    if r.off != len(buf) - 4:
        raise CrcMismatch("file length does not match structure")

    (stored_crc,) = struct.unpack("<I", buf[-4:])
    if zlib.crc32(buf[:-4]) & 0xFFFFFFFF != stored_crc:
        raise CrcMismatch("CRC32 trailer does not match file contents")

    try:
        labels = [raw.decode("utf-8") for raw in raw_labels]
    except UnicodeDecodeError as e:
        raise StoreError(f"label table is not valid UTF-8: {e}") from None

    samples: list[StoredSample] = []
    centroids: list[StoredCentroid] = []
    assignments: list[IvfAssignment] = []
    for stype, count, body in raw_sections:
        off = 0
        for _ in range(count):
            if stype == SECTION_SAMPLES:
                sid, label_id = struct.unpack_from("<QI", body, off)
                vec = np.frombuffer(body, "<f4", dim, off + 12).copy()
                samples.append(StoredSample(id=sid, label_id=label_id, vector=vec))
                off += 12 + 4 * dim
            elif stype == SECTION_CENTROIDS:
                label_id, member_count = struct.unpack_from("<II", body, off)
                vec = np.frombuffer(body, "<f4", dim, off + 8).copy()
                centroids.append(
                    StoredCentroid(label_id=label_id, member_count=member_count, vector=vec)
                )
                off += 8 + 4 * dim
            else:
                sid, part = struct.unpack_from("<QI", body, off)
                assignments.append(IvfAssignment(id=sid, partition=part))
                off += 12
    return dim, labels, samples, centroids, assignments


def write_store(samples, centroids: Sequence[ClassCentroid], path, dim: int | None = None) -> None:
    """Write a canonical classification store.

    ``samples`` is a sequence of (id, label, embedding) where the embedding
    is a DocumentEmbedding or a raw vector. ``dim`` is required only when
    both samples and centroids are empty.
    """
    rows = []
    for sid, label, emb in samples:
        vec = emb.vector if hasattr(emb, "vector") else emb
        rows.append((_check_id(sid), str(label), check_vector(vec)))
    ids = [sid for sid, _, _ in rows]
    if len(set(ids)) != len(ids):
        raise DuplicateId("sample ids must be unique")

    dims = {v.size for _, _, v in rows} | {c.dim for c in centroids}
    if len(dims) > 1:
        raise InconsistentDim(f"mixed dims {sorted(dims)}")
    if dims:
        inferred = dims.pop()
        if dim is not None and dim != inferred:
            raise InconsistentDim(f"dim={dim} but content has dim {inferred}")
        dim = inferred
    if dim is None:
        raise InconsistentDim("dim is required for an empty store")

    label_table = sorted({label for _, label, _ in rows} | {c.label for c in centroids})
    label_pos = {label: i for i, label in enumerate(label_table)}

    stored_samples = [
        StoredSample(id=sid, label_id=label_pos[label], vector=vec)
        for sid, label, vec in sorted(rows, key=lambda r: r[0])
    ]
    stored_centroids = [
        StoredCentroid(label_id=label_pos[c.label], member_count=c.member_count, vector=c.vector)
        for c in sorted(centroids, key=lambda c: c.label)
    ]
    write_container(path, dim, label_table, stored_samples, stored_centroids)


def read_store(path):
    """Read a classification store: (samples, centroids, label_table)."""
    dim, labels, samples, centroids, assignments = read_container(path)
    if assignments:
        raise StoreError("file contains index assignments; not a classification store")
    for s in samples:
        if s.label_id >= len(labels):
            raise BadLabelRef(f"sample {s.id} references label_id {s.label_id}")
    for c in centroids:
        if c.label_id >= len(labels):
            raise BadLabelRef(f"centroid references label_id {c.label_id}")
    return samples, centroids, labels


def centroids_as_objects(centroids: Sequence[StoredCentroid], label_table: Sequence[str]) -> list[ClassCentroid]:
    return [
        ClassCentroid(vector=c.vector, label=label_table[c.label_id], member_count=c.member_count)
        for c in centroids
    ]
