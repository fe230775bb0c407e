"""Dense vector storage, exhaustive cosine k-NN search and the COVR file format.

COVR layout (little-endian)::

    b"COVR" | u8 version=1 | u32 dim | u64 count |
    count x ( u16 id_len | id bytes (UTF-8) | dim x f32 )

Vectors are kept as float32 on disk and widened to float64 in memory.
"""

from __future__ import annotations

import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import BinaryIO, Sequence

import numpy as np

from coverkit.data import RankedList

MAGIC = b"COVR"
VERSION = 1
NORM_TOL = 1e-6
# Fixed partition size so results do not depend on the worker count.
QUERY_CHUNK = 64


class VectorFormatError(ValueError):
    pass


class BadMagicError(VectorFormatError):
    pass


class VersionMismatchError(VectorFormatError):
    pass


class TruncatedFileError(VectorFormatError):
    pass


class ZeroNormError(ValueError):
    def __init__(self, row_id: str):
        super().__init__(f"zero-norm vector for id {row_id!r}")
        self.row_id = row_id


@dataclass(frozen=True)
class EmbeddingMatrix:
    """Row-normalized vectors keyed by id."""

    ids: tuple[str, ...]
    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.float64)
        if rows.ndim != 2:
            raise ValueError("rows must be a 2-D array")
        if rows.shape[0] != len(self.ids):
            raise ValueError(f"{len(self.ids)} ids for {rows.shape[0]} rows")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate ids in embedding matrix")
        if rows.shape[0]:
            norms = np.linalg.norm(rows, axis=1)
            bad = np.flatnonzero(np.abs(norms - 1.0) > NORM_TOL)
            if bad.size:
                raise ValueError(f"row {self.ids[bad[0]]!r} is not unit-norm ({norms[bad[0]]:.9f})")
        rows.setflags(write=False)
        object.__setattr__(self, "ids", tuple(self.ids))
        object.__setattr__(self, "rows", rows)

    @property
    def dim(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return len(self.ids)

    def index_of(self) -> dict[str, int]:
        return {doc_id: i for i, doc_id in enumerate(self.ids)}

    def vector(self, row_id: str) -> np.ndarray:
        return self.rows[self.ids.index(row_id)]


@dataclass(frozen=True)
class SearchResult:
    query_id: str
    items: tuple[tuple[str, float], ...]

    def to_ranked_list(self, tag: str = "dense") -> RankedList:
        return RankedList(self.query_id, self.items, tag)


def normalize_rows(ids: Sequence[str], raw: np.ndarray | Sequence[Sequence[float]]) -> EmbeddingMatrix:
    raw = np.asarray(raw, dtype=np.float64)
    if raw.ndim != 2:
        if raw.size == 0:
            raw = raw.reshape(0, 0)
        else:
            raise ValueError("all rows must share one dimension")
    norms = np.linalg.norm(raw, axis=1)
    for i in np.flatnonzero(norms == 0.0):
        raise ZeroNormError(ids[i])
    return EmbeddingMatrix(tuple(ids), raw / norms[:, None])


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    # Summation in index order keeps cosine(a, b) == cosine(b, a) bit-for-bit.
    return min(1.0, max(-1.0, float(np.sum(a * b))))


def _top_k(scores: np.ndarray, id_order: np.ndarray, k: int) -> np.ndarray:
    """Indices of the top-k scores under the global tie-break."""
    n = scores.shape[0]
    if k < n:
        kth = np.partition(scores, n - k)[n - k]
        cand = np.flatnonzero(scores >= kth)
    else:
        cand = np.arange(n)
    order = np.lexsort((id_order[cand], -scores[cand]))
    return cand[order[:k]]


def knn_search(queries: EmbeddingMatrix, docs: EmbeddingMatrix, k: int, workers: int = 1) -> list[SearchResult]:
    if k <= 0:
        raise ValueError("k must be positive")
    if len(queries) and len(docs) and queries.dim != docs.dim:
        raise ValueError(f"dimension mismatch: queries {queries.dim}, docs {docs.dim}")
    if not len(docs):
        return [SearchResult(q, ()) for q in queries.ids]
    # rank of each doc id in lexicographic order, for the ascending-id tie-break
    id_order = np.empty(len(docs), dtype=np.int64)
    id_order[np.argsort(np.array(docs.ids, dtype=object), kind="stable")] = np.arange(len(docs))

    def run_chunk(start: int) -> list[SearchResult]:
        block = queries.rows[start : start + QUERY_CHUNK]
        scores = np.clip(block @ docs.rows.T, -1.0, 1.0)
        out = []
        for j, row in enumerate(scores):
            top = _top_k(row, id_order, k)
            items = tuple((docs.ids[i], float(row[i])) for i in top)
            out.append(SearchResult(queries.ids[start + j], items))
        return out

    starts = range(0, len(queries), QUERY_CHUNK)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(run_chunk, starts))
    else:
        chunks = [run_chunk(s) for s in starts]
    return [r for chunk in chunks for r in chunk]


# ---------------------------------------------------------------------------
# binary format
# ---------------------------------------------------------------------------


def write_vectors(m: EmbeddingMatrix, sink: BinaryIO) -> None:
    dim = m.dim if len(m) else (m.rows.shape[1] if m.rows.ndim == 2 else 0)
    sink.write(MAGIC)
    sink.write(struct.pack("<BIQ", VERSION, dim, len(m)))
    rows32 = m.rows.astype("<f4")
    for row_id, row in zip(m.ids, rows32):
        raw_id = row_id.encode("utf-8")
        if len(raw_id) > 0xFFFF:
            raise ValueError(f"id too long: {row_id[:40]!r}...")
        sink.write(struct.pack("<H", len(raw_id)))
        sink.write(raw_id)
        sink.write(row.tobytes())


def _read_exact(source: BinaryIO, n: int, what: str) -> bytes:
    buf = source.read(n)
    if len(buf) != n:
        raise TruncatedFileError(f"truncated file while reading {what}")
    return buf


def read_vectors(source: BinaryIO) -> EmbeddingMatrix:
    magic = source.read(4)
    if len(magic) == 4 and magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if len(magic) != 4:
        raise TruncatedFileError("truncated file while reading magic")
    version, dim, count = struct.unpack("<BIQ", _read_exact(source, 13, "header"))
    if version != VERSION:
        raise VersionMismatchError(f"unsupported version {version}, expected {VERSION}")
    ids, vecs = [], []
    for i in range(count):  # no preallocation: a corrupt count must not allocate
        (id_len,) = struct.unpack("<H", _read_exact(source, 2, f"id length of row {i}"))
        ids.append(_read_exact(source, id_len, f"id of row {i}").decode("utf-8"))
        vecs.append(np.frombuffer(_read_exact(source, 4 * dim, f"vector of row {i}"), dtype="<f4"))
    rows = np.array(vecs, dtype=np.float64).reshape(count, dim)
    # f32 storage perturbs norms by ~1e-7; restore the unit-norm invariant
    if count:
        rows /= np.linalg.norm(rows, axis=1)[:, None]
    return EmbeddingMatrix(tuple(ids), rows)


def save_vectors(m: EmbeddingMatrix, path) -> None:
    with open(path, "wb") as f:
        write_vectors(m, f)


def load_vectors(path) -> EmbeddingMatrix:
    with open(path, "rb") as f:
        return read_vectors(f)
