"""Embedding storage and exact inner-product (flat) top-k search.

The embedding file is the contract with any external encoder:

    magic "M3EB" | version u32 | dim u32 | count u64
    id block:     count x (u32 byte-length + UTF-8 id)
    vector block: count x dim little-endian float32, row-major

Search accumulates dot products in float64 regardless of the float32
storage, returns results in descending score order with ties broken by
ascending id, and is exact: identical id set and order to brute-force
evaluation of all dot products.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionError, FormatError

_MAGIC = b"M3EB"
_VERSION = 1


@dataclass
class EmbeddingStore:
    ids: list[str]
    vectors: np.ndarray  # (count, dim) float32

    def __post_init__(self):
        self.vectors = np.asarray(self.vectors, dtype=np.float32)
        if self.vectors.ndim != 2:
            raise ValueError("vectors must be a 2-D array")
        if len(self.ids) != self.vectors.shape[0]:
            raise ValueError("id count does not match vector count")
        if len(set(self.ids)) != len(self.ids):
            raise ValueError("duplicate ids in embedding store")
        if self.vectors.size and not np.isfinite(self.vectors).all():
            raise ValueError("non-finite components in embedding store")

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]

    @property
    def count(self) -> int:
        return self.vectors.shape[0]


def save_embeddings(store: EmbeddingStore, path: str | Path) -> None:
    if store.dim < 1:
        raise FormatError("refusing to save an embedding store with dim 0")
    with Path(path).open("wb") as out:
        out.write(_MAGIC)
        out.write(struct.pack("<IIQ", _VERSION, store.dim, store.count))
        for id_ in store.ids:
            data = id_.encode("utf-8")
            out.write(struct.pack("<I", len(data)))
            out.write(data)
        out.write(np.ascontiguousarray(store.vectors, dtype="<f4").tobytes())


def load_embeddings(path: str | Path) -> EmbeddingStore:
    with Path(path).open("rb") as inp:
        magic = inp.read(4)
        if magic != _MAGIC:
            raise FormatError(f"{path}: not an embedding file (bad magic {magic!r})")
        header = inp.read(16)
        if len(header) != 16:
            raise FormatError(f"{path}: truncated header")
        version, dim, count = struct.unpack("<IIQ", header)
        if version != _VERSION:
            raise FormatError(f"{path}: unsupported embedding file version {version}")
        ids: list[str] = []
        for _ in range(count):
            raw = inp.read(4)
            if len(raw) != 4:
                raise FormatError(f"{path}: truncated id block")
            (length,) = struct.unpack("<I", raw)
            data = inp.read(length)
            if len(data) != length:
                raise FormatError(f"{path}: truncated id block")
            ids.append(data.decode("utf-8"))
        expected = count * dim * 4
        blob = inp.read(expected)
        if len(blob) != expected:
            raise FormatError(f"{path}: truncated vector block")
        if inp.read(1):
            raise FormatError(f"{path}: trailing bytes after vector block")
    if len(set(ids)) != len(ids):
        raise FormatError(f"{path}: duplicate id in embedding file")
    vectors = np.frombuffer(blob, dtype="<f4").reshape(count, dim)
    return EmbeddingStore(ids, vectors.copy())


class DenseIndex:
    """Flat exact-MIPS index over an embedding store."""

    def __init__(self, store: EmbeddingStore):
        self.store = store
        self._matrix = store.vectors.astype(np.float64)

    @property
    def dim(self) -> int:
        return self.store.dim

    @property
    def count(self) -> int:
        return self.store.count


def mips_search(index: DenseIndex, query: np.ndarray, k: int) -> list[tuple[str, float]]:
    """Exact top-k by inner product; ties broken by ascending id."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    query = np.asarray(query, dtype=np.float64).reshape(-1)
    if query.shape[0] != index.dim:
        raise DimensionError(
            f"query dim {query.shape[0]} != index dim {index.dim}")
    if index.count == 0:
        return []
    scores = index._matrix @ query
    order = sorted(range(index.count),
                   key=lambda i: (-scores[i], index.store.ids[i]))
    return [(index.store.ids[i], float(scores[i])) for i in order[:k]]


def batch_mips_search(index: DenseIndex, queries, k: int) -> list[list[tuple[str, float]]]:
    """Per-query mips_search, result order matching query order.

    Implemented as a plain map over mips_search so batch results are
    bit-identical to single-query results.
    """
    results = []
    for pos, query in enumerate(queries):
        arr = np.asarray(query, dtype=np.float64).reshape(-1)
        if arr.shape[0] != index.dim:
            raise DimensionError(
                f"query {pos}: dim {arr.shape[0]} != index dim {index.dim}")
        results.append(mips_search(index, arr, k))
    return results
