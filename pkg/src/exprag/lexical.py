"""Inverted index and Okapi BM25 scoring."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, replace
from typing import Sequence

from .corpus import Document
from .ranking import RankedList, StrategyId, rank_scores
from .text import rewrite_query, tokenize

BM25_K1 = 1.2
BM25_B = 0.75


@dataclass(frozen=True)
class LexicalIndex:
    doc_ids: tuple[str, ...]
    doc_lengths: tuple[int, ...]
    postings: dict[str, tuple[tuple[int, int], ...]]
    avgdl: float

    @property
    def n_docs(self) -> int:
        return len(self.doc_ids)

    def df(self, term: str) -> int:
        return len(self.postings.get(term, ()))

    def tf(self, term: str, doc_id: str) -> int:
        internal = self.doc_ids.index(doc_id)
        for i, freq in self.postings.get(term, ()):
            if i == internal:
                return freq
        return 0

    def idf(self, term: str) -> float:
        df = self.df(term)
        return math.log(1.0 + (self.n_docs - df + 0.5) / (df + 0.5))


def build_lexical_index(docs: Sequence[Document]) -> LexicalIndex:
    if not docs:
        raise ValueError("cannot index an empty corpus")
    postings: dict[str, list[tuple[int, int]]] = {}
    lengths = []
    for internal, doc in enumerate(docs):
        tokens = tokenize(doc.indexed_text)
        lengths.append(len(tokens))
        for term, freq in Counter(tokens).items():
            postings.setdefault(term, []).append((internal, freq))
    doc_ids = tuple(d.doc_id for d in docs)
    if len(set(doc_ids)) != len(doc_ids):
        raise ValueError("doc ids must be unique")
    return LexicalIndex(
        doc_ids=doc_ids,
        doc_lengths=tuple(lengths),
        postings={t: tuple(p) for t, p in postings.items()},
        avgdl=sum(lengths) / len(lengths),
    )


def bm25_scores(query: str, index: LexicalIndex, k1: float = BM25_K1, b: float = BM25_B) -> dict[int, float]:
    # Repeated query terms contribute once per occurrence.
    scores: dict[int, float] = {}
    avgdl = index.avgdl or 1.0
    for term in tokenize(query):
        plist = index.postings.get(term)
        if not plist:
            continue
        idf = index.idf(term)
        for internal, tf in plist:
            norm = k1 * (1.0 - b + b * index.doc_lengths[internal] / avgdl)
            scores[internal] = scores.get(internal, 0.0) + idf * tf * (k1 + 1.0) / (tf + norm)
    return scores


def search_bm25(query: str, index: LexicalIndex, k: int, k1: float = BM25_K1, b: float = BM25_B) -> RankedList:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    scores = bm25_scores(query, index, k1, b)
    return rank_scores(((index.doc_ids[i], s) for i, s in scores.items()), k, StrategyId.BM25)


def search_rewrite_bm25(query: str, index: LexicalIndex, k: int) -> RankedList:
    """BM25 over the rewritten query; an empty rewrite falls back to the raw query."""
    rewritten = rewrite_query(query) or query
    hits = search_bm25(rewritten, index, k)
    return [replace(h, strategy=StrategyId.REWRITE_BM25) for h in hits]
