"""Flat vector index with exhaustive squared-L2 search.

Vectors are stored as one contiguous row-major float32 matrix. Search scans
every row in fixed-size blocks, accumulating in float64, and returns hits
ordered by (distance, row id).

On disk an index is two files::

    <name>.bin          uint64 dim, uint64 count (little-endian), then the
                        float32 matrix, little-endian, row-major
    <name>.meta.jsonl   one metadata object per row
"""

from __future__ import annotations

import json
import os
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from claimbench.errors import DimensionMismatch, EmptyIndexError, KTooLargeError, SchemaError

__all__ = [
    "VectorIndex",
    "SearchHit",
    "build_index",
    "search",
    "load_embeddings",
    "DEFAULT_DIM",
]

DEFAULT_DIM = 384
_BLOCK_ROWS = 8192
_HEADER = struct.Struct("<QQ")


@dataclass(frozen=True)
class SearchHit:
    row: int
    distance: float
    metadata: Mapping[str, Any]


class VectorIndex:
    """Immutable flat index. Build with :func:`build_index`."""

    def __init__(self, vectors: np.ndarray, metadata: Sequence[Mapping[str, Any]]):
        vectors = np.ascontiguousarray(vectors, dtype="<f4")
        if vectors.ndim != 2:
            raise DimensionMismatch("vectors must be a 2-D matrix")
        if vectors.shape[0] == 0:
            raise EmptyIndexError("an index needs at least one row")
        if len(metadata) != vectors.shape[0]:
            raise SchemaError(
                f"{len(metadata)} metadata records for {vectors.shape[0]} vectors"
            )
        vectors.setflags(write=False)
        self._vectors = vectors
        self._metadata = tuple(dict(m) for m in metadata)

    @property
    def dim(self) -> int:
        return int(self._vectors.shape[1])

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def metadata(self) -> tuple[Mapping[str, Any], ...]:
        return self._metadata

    def __len__(self) -> int:
        return int(self._vectors.shape[0])

    def distances(self, query: Sequence[float] | np.ndarray) -> np.ndarray:
        """Squared L2 distance from ``query`` to every row (float64)."""
        q = np.asarray(query, dtype=np.float64)
        if q.ndim != 1 or q.shape[0] != self.dim:
            raise DimensionMismatch(f"query has shape {q.shape}, index dim is {self.dim}")
        out = np.empty(len(self), dtype=np.float64)
        buf = np.empty((min(_BLOCK_ROWS, len(self)), self.dim), dtype=np.float64)
        for start in range(0, len(self), _BLOCK_ROWS):
            block = self._vectors[start : start + _BLOCK_ROWS]
            diff = buf[: block.shape[0]]
            np.subtract(block, q, out=diff)
            np.einsum("ij,ij->i", diff, diff, out=out[start : start + block.shape[0]])
        return out

    def search(self, query: Sequence[float] | np.ndarray, k: int = 2) -> list[SearchHit]:
        return search(self, query, k)

    def save(self, path: str | os.PathLike) -> None:
        path = Path(path)
        with path.with_suffix(".bin").open("wb") as fh:
            fh.write(_HEADER.pack(self.dim, len(self)))
            fh.write(self._vectors.tobytes(order="C"))
        with path.with_suffix(".meta.jsonl").open("w", encoding="utf-8") as fh:
            for meta in self._metadata:
                fh.write(json.dumps(meta, sort_keys=True) + "\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> "VectorIndex":
        path = Path(path)
        raw = path.with_suffix(".bin").read_bytes()
        if len(raw) < _HEADER.size:
            raise SchemaError(f"{path.with_suffix('.bin')}: truncated header")
        dim, count = _HEADER.unpack_from(raw)
        body = raw[_HEADER.size :]
        if len(body) != dim * count * 4:
            raise SchemaError(
                f"{path.with_suffix('.bin')}: expected {dim * count * 4} bytes of vectors, "
                f"found {len(body)}"
            )
        vectors = np.frombuffer(body, dtype="<f4").reshape(count, dim)
        meta_lines = path.with_suffix(".meta.jsonl").read_text(encoding="utf-8").splitlines()
        metadata = [json.loads(line) for line in meta_lines if line.strip()]
        return cls(vectors.copy(), metadata)


def build_index(
    rows: Iterable[tuple[Sequence[float], Mapping[str, Any]]], dim: int = DEFAULT_DIM
) -> VectorIndex:
    """Stack ``(vector, metadata)`` rows; row ids follow insertion order."""
    vectors = []
    metadata = []
    for i, (vec, meta) in enumerate(rows):
        arr = np.asarray(vec, dtype=np.float32)
        if arr.ndim != 1 or arr.shape[0] != dim:
            raise DimensionMismatch(f"row {i}: vector has shape {arr.shape}, expected ({dim},)", i)
        vectors.append(arr)
        metadata.append(meta)
    if not vectors:
        raise EmptyIndexError("an index needs at least one row")
    return VectorIndex(np.stack(vectors), metadata)


def search(index: VectorIndex, query: Sequence[float] | np.ndarray, k: int = 2) -> list[SearchHit]:
    """Exact ``k`` nearest rows by squared L2; ties broken by lower row id."""
    if k < 1:
        raise KTooLargeError(f"k must be positive, got {k}")
    if k > len(index):
        raise KTooLargeError(f"k={k} exceeds index size {len(index)}")
    dist = index.distances(query)
    if k < len(dist):
        # everything at or below the k-th smallest distance, then exact ordering
        kth = np.partition(dist, k - 1)[k - 1]
        candidates = np.flatnonzero(dist <= kth)
    else:
        candidates = np.arange(len(dist))
    order = np.lexsort((candidates, dist[candidates]))[:k]
    rows = candidates[order]
    return [SearchHit(int(r), float(dist[r]), index.metadata[r]) for r in rows]


def load_embeddings(path: str | os.PathLike, dim: int | None = None) -> dict[str, np.ndarray]:
    """Read ``{"id": ..., "vector": [...]}`` JSONL into an id -> vector map."""
    out: dict[str, np.ndarray] = {}
    with Path(path).open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
                key, vec = str(data["id"]), np.asarray(data["vector"], dtype=np.float32)
            except (json.JSONDecodeError, KeyError, TypeError, ValueError):
                raise SchemaError("expected {id, vector[]}", lineno) from None
            if dim is None:
                dim = vec.shape[0]
            if vec.ndim != 1 or vec.shape[0] != dim:
                raise DimensionMismatch(f"line {lineno}: vector length {vec.size}, expected {dim}", lineno)
            out[key] = vec
    return out
