"""Exhaustive cosine retrieval over unit-norm embeddings.

The built-in embedder hashes character trigrams into a fixed number of
buckets. It is deterministic and dependency free; real encoders can be
plugged in through an embeddings file (see :func:`load_embeddings`).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .corpus import Document
from .errors import DataError, MalformedRecordError
from .ranking import RankedList, StrategyId, rank_scores

DEFAULT_DIM = 2048
MIN_DIM = 16


def trigram_embedder_id(dim: int) -> str:
    return f"trigram-hash-v1/dim={dim}"


@lru_cache(maxsize=1 << 16)
def _bucket(trigram: str, dim: int) -> int:
    digest = hashlib.blake2b(trigram.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % dim


def embed_text(text: str, dim: int = DEFAULT_DIM) -> np.ndarray:
    if dim < MIN_DIM:
        raise ValueError(f"embedding dimension must be >= {MIN_DIM}, got {dim}")
    vec = np.zeros(dim, dtype=np.float64)
    lowered = text.lower()
    for i in range(len(lowered) - 2):
        vec[_bucket(lowered[i : i + 3], dim)] += 1.0
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


def normalize(vec) -> np.ndarray:
    arr = np.asarray(vec, dtype=np.float64)
    norm = np.linalg.norm(arr)
    return arr / norm if norm > 0 else arr


@dataclass(frozen=True, eq=False)
class VectorIndex:
    doc_ids: tuple[str, ...]
    matrix: np.ndarray
    embedder: str

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def vector(self, doc_id: str) -> np.ndarray:
        return self.matrix[self.doc_ids.index(doc_id)]


def build_vector_index(
    docs: Sequence[Document],
    dim: int = DEFAULT_DIM,
    vectors: Mapping[str, np.ndarray] | None = None,
    embedder: str | None = None,
) -> VectorIndex:
    """Embed ``docs`` with the trigram embedder, or take them from ``vectors``."""
    if not docs:
        raise ValueError("cannot index an empty corpus")
    if vectors is None:
        rows = [embed_text(d.indexed_text, dim) for d in docs]
        embedder = trigram_embedder_id(dim)
    else:
        missing = [d.doc_id for d in docs if d.doc_id not in vectors]
        if missing:
            raise DataError(f"{len(missing)} documents have no embedding (first: {missing[0]!r})")
        rows = [normalize(vectors[d.doc_id]) for d in docs]
        dims = {r.shape[0] for r in rows}
        if len(dims) != 1:
            raise DataError(f"embeddings have inconsistent dimensions: {sorted(dims)}")
        embedder = embedder or "external"
    matrix = np.vstack(rows)
    matrix.setflags(write=False)
    return VectorIndex(tuple(d.doc_id for d in docs), matrix, embedder)


def dense_scores(query_vector: np.ndarray, vindex: VectorIndex) -> np.ndarray:
    if query_vector.shape != (vindex.dim,):
        raise ValueError(f"dimension mismatch: query has {query_vector.shape[0]}, index has {vindex.dim}")
    # Row-wise multiply+sum keeps identical rows bit-identical (BLAS matmul may not).
    return (vindex.matrix * query_vector).sum(axis=1)


def search_dense(query: str, vindex: VectorIndex, k: int, query_vector: np.ndarray | None = None) -> RankedList:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if query_vector is None:
        if not vindex.embedder.startswith("trigram-hash-v1/"):
            raise ValueError(f"index embedder {vindex.embedder!r} needs a precomputed query vector")
        query_vector = embed_text(query, vindex.dim)
    scores = dense_scores(np.asarray(query_vector, dtype=np.float64), vindex)
    return rank_scores(zip(vindex.doc_ids, scores.tolist()), k, StrategyId.DENSE)


def load_embeddings(path) -> dict[str, np.ndarray]:
    """Read ``{"_id": ..., "vector": [...]}`` JSON-Lines; vectors are re-normalized."""
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    out: dict[str, np.ndarray] = {}
    dim = None
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                rid, vec = str(obj["_id"]), [float(x) for x in obj["vector"]]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise MalformedRecordError(path, line_no, f"bad embedding record ({exc})") from exc
            if dim is None:
                dim = len(vec)
            elif len(vec) != dim:
                raise MalformedRecordError(path, line_no, f"vector has {len(vec)} dims, expected {dim}")
            out[rid] = normalize(vec)
    return out


def write_embeddings(vectors: Mapping[str, np.ndarray], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rid, vec in vectors.items():
            fh.write(json.dumps({"_id": rid, "vector": [float(x) for x in vec]}) + "\n")
