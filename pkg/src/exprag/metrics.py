"""Recall@k, MRR@k and nDCG@k (linear gain) for a single ranked list."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence


class NoRelevantDocuments(ValueError):
    """The query has no document with grade > 0; callers skip it."""


def _check(qrels: Mapping[str, int], k: int) -> set[str]:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    relevant = {d for d, g in qrels.items() if g > 0}
    if not relevant:
        raise NoRelevantDocuments("no relevant documents for query")
    return relevant


def recall_at_k(ranked: Sequence[str], qrels: Mapping[str, int], k: int = 10) -> float:
    relevant = _check(qrels, k)
    return len(relevant.intersection(ranked[:k])) / len(relevant)


def mrr_at_k(ranked: Sequence[str], qrels: Mapping[str, int], k: int = 10) -> float:
    _check(qrels, k)
    for i, doc_id in enumerate(ranked[:k], start=1):
        if qrels.get(doc_id, 0) > 0:
            return 1.0 / i
    return 0.0


def dcg(grades: Sequence[float]) -> float:
    return sum(g / math.log2(i + 1) for i, g in enumerate(grades, start=1))


def ndcg_at_k(ranked: Sequence[str], qrels: Mapping[str, int], k: int = 10) -> float:
    _check(qrels, k)
    gains = [max(qrels.get(d, 0), 0) for d in ranked[:k]]
    ideal = sorted((g for g in qrels.values() if g > 0), reverse=True)[:k]
    return dcg(gains) / dcg(ideal)


@dataclass(frozen=True)
class MetricSet:
    recall_at_k: float
    mrr_at_k: float
    ndcg_at_k: float
    k: int
    query_count: int

    @classmethod
    def mean_of(cls, rows: Sequence[tuple[float, float, float]], k: int) -> "MetricSet":
        n = len(rows)
        if n == 0:
            return cls(0.0, 0.0, 0.0, k, 0)
        return cls(
            sum(r[0] for r in rows) / n,
            sum(r[1] for r in rows) / n,
            sum(r[2] for r in rows) / n,
            k,
            n,
        )

    def format_text(self) -> str:
        k = self.k
        return (
            f"Recall@{k}  {self.recall_at_k:.4f}\n"
            f"MRR@{k}     {self.mrr_at_k:.4f}\n"
            f"nDCG@{k}    {self.ndcg_at_k:.4f}\n"
            f"queries    {self.query_count}"
        )

    def to_csv(self) -> str:
        k = self.k
        return (
            f"recall@{k},mrr@{k},ndcg@{k},queries\n"
            f"{self.recall_at_k:.6f},{self.mrr_at_k:.6f},{self.ndcg_at_k:.6f},{self.query_count}\n"
        )
