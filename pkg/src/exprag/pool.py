"""The candidate retriever pool and its on-disk index directory."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field, replace
from functools import cached_property
from pathlib import Path
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .corpus import Document, load_corpus, write_corpus
from .dense import DEFAULT_DIM, VectorIndex, build_vector_index, normalize, search_dense
from .errors import DataError
from .fusion import DEFAULT_K_RRF, fuse_rrf
from .lexical import LexicalIndex, build_lexical_index, search_bm25, search_rewrite_bm25
from .ranking import RankedList, StrategyId

DEFAULT_DEPTH = 100
INDEX_FORMAT = 1


@dataclass(frozen=True, eq=False)
class RetrieverPool:
    documents: Mapping[str, Document]
    lexical: LexicalIndex
    vector: VectorIndex
    k_rrf: int = DEFAULT_K_RRF
    depth: int = DEFAULT_DEPTH
    query_vectors: Mapping[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if self.lexical.doc_ids != self.vector.doc_ids:
            raise ValueError("lexical and vector indexes cover different documents")
        if self.k_rrf < 1 or self.depth < 1:
            raise ValueError("k_rrf and depth must be >= 1")

    @cached_property
    def version(self) -> str:
        """Short content hash of the index metadata."""
        h = hashlib.sha256()
        meta = {
            "doc_ids": list(self.lexical.doc_ids),
            "lengths": list(self.lexical.doc_lengths),
            "embedder": self.vector.embedder,
            "dim": self.vector.dim,
            "k_rrf": self.k_rrf,
            "depth": self.depth,
        }
        h.update(json.dumps(meta, sort_keys=True).encode("utf-8"))
        h.update(np.ascontiguousarray(self.vector.matrix).tobytes())
        return h.hexdigest()[:16]

    def query_vector(self, query_id: str | None) -> np.ndarray | None:
        """Precomputed vector for ``query_id``; ``None`` means embed the text."""
        if query_id is not None and query_id in self.query_vectors:
            return self.query_vectors[query_id]
        return None


def build_pool(
    docs: Sequence[Document],
    *,
    dim: int = DEFAULT_DIM,
    k_rrf: int = DEFAULT_K_RRF,
    depth: int = DEFAULT_DEPTH,
    vectors: Mapping[str, np.ndarray] | None = None,
    query_vectors: Mapping[str, np.ndarray] | None = None,
    embedder: str | None = None,
) -> RetrieverPool:
    """Index ``docs`` for every strategy.

    When ``vectors`` is given it must hold one embedding per document and
    ``query_vectors`` should cover the queries that will be run.
    """
    return RetrieverPool(
        documents=MappingProxyType({d.doc_id: d for d in docs}),
        lexical=build_lexical_index(docs),
        vector=build_vector_index(docs, dim=dim, vectors=vectors, embedder=embedder),
        k_rrf=k_rrf,
        depth=depth,
        query_vectors=MappingProxyType({q: normalize(v) for q, v in (query_vectors or {}).items()}),
    )


def _dense(query: str, pool: RetrieverPool, k: int, query_id: str | None) -> RankedList:
    return search_dense(query, pool.vector, k, query_vector=pool.query_vector(query_id))


def search_hybrid_rrf(query: str, pool: RetrieverPool, k: int, query_id: str | None = None) -> RankedList:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    runs = [
        search_bm25(query, pool.lexical, pool.depth),
        _dense(query, pool, pool.depth, query_id),
    ]
    return fuse_rrf(runs, k_rrf=pool.k_rrf, k=k)


def execute_strategy(
    strategy: StrategyId | str,
    query: str,
    pool: RetrieverPool,
    k: int,
    query_id: str | None = None,
) -> RankedList:
    strategy = StrategyId.parse(strategy)
    if strategy is StrategyId.BM25:
        hits = search_bm25(query, pool.lexical, k)
    elif strategy is StrategyId.REWRITE_BM25:
        hits = search_rewrite_bm25(query, pool.lexical, k)
    elif strategy is StrategyId.DENSE:
        hits = _dense(query, pool, k, query_id)
    else:
        hits = search_hybrid_rrf(query, pool, k, query_id)
    return [h if h.strategy is strategy else replace(h, strategy=strategy) for h in hits]


def save_index(pool: RetrieverPool, directory) -> Path:
    """Write the pool to ``directory``; the lexical index is rebuilt on load."""
    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    write_corpus(pool.documents.values(), out / "corpus.jsonl")
    np.save(out / "vectors.npy", np.asarray(pool.vector.matrix))
    qids = sorted(pool.query_vectors)
    if qids:
        np.save(out / "query_vectors.npy", np.vstack([pool.query_vectors[q] for q in qids]))
    meta = {
        "format": INDEX_FORMAT,
        "embedder": pool.vector.embedder,
        "dim": pool.vector.dim,
        "k_rrf": pool.k_rrf,
        "depth": pool.depth,
        "n_docs": len(pool.documents),
        "avgdl": pool.lexical.avgdl,
        "query_ids": qids,
        "pool_version": pool.version,
    }
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return out


def load_index(directory, *, k_rrf: int | None = None, depth: int | None = None) -> RetrieverPool:
    src = Path(directory)
    meta_path = src / "meta.json"
    if not meta_path.is_file():
        raise DataError(f"{src} is not an index directory (missing meta.json)")
    meta = json.loads(meta_path.read_text(encoding="utf-8"))
    if meta.get("format") != INDEX_FORMAT:
        raise DataError(f"{src}: unsupported index format {meta.get('format')!r}")
    docs = load_corpus(src / "corpus.jsonl")
    matrix = np.load(src / "vectors.npy")
    if matrix.shape != (len(docs), meta["dim"]):
        raise DataError(f"{src}: vectors.npy shape {matrix.shape} does not match corpus")
    query_vectors = {}
    if meta["query_ids"]:
        qmat = np.load(src / "query_vectors.npy")
        query_vectors = dict(zip(meta["query_ids"], qmat))
    matrix.setflags(write=False)
    return RetrieverPool(
        documents=MappingProxyType({d.doc_id: d for d in docs}),
        lexical=build_lexical_index(docs),
        vector=VectorIndex(tuple(d.doc_id for d in docs), matrix, meta["embedder"]),
        k_rrf=k_rrf or meta["k_rrf"],
        depth=depth or meta["depth"],
        query_vectors=MappingProxyType(query_vectors),
    )
