"""Strategy identifiers and the ranked-hit record every retriever returns."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable


class StrategyId(str, Enum):
    BM25 = "bm25"
    REWRITE_BM25 = "rewrite_bm25"
    DENSE = "dense"
    HYBRID_RRF = "hybrid_rrf"

    def __str__(self) -> str:
        return self.value

    @classmethod
    def parse(cls, name: "str | StrategyId") -> "StrategyId":
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(s.value for s in cls)
            raise ValueError(f"unknown strategy {name!r} (expected one of: {valid})") from None


# Tie-break order for argmax and votes: alphabetical by name.
STRATEGY_NAME_ORDER: tuple[StrategyId, ...] = tuple(sorted(StrategyId, key=lambda s: s.value))


@dataclass(frozen=True)
class RankedHit:
    doc_id: str
    rank: int
    score: float
    strategy: StrategyId


RankedList = list[RankedHit]


def rank_scores(scores: Iterable[tuple[str, float]], k: int, strategy: StrategyId) -> RankedList:
    """Top-``k`` by score, ties by ascending doc id, zero scores dropped."""
    ordered = sorted(((d, s) for d, s in scores if s != 0.0), key=lambda p: (-p[1], p[0]))
    return [RankedHit(d, i, float(s), strategy) for i, (d, s) in enumerate(ordered[:k], start=1)]


def check_ranked_list(hits: RankedList) -> None:
    """Raise ``AssertionError`` when ranks have gaps or scores increase."""
    for i, hit in enumerate(hits, start=1):
        assert hit.rank == i, f"rank gap at position {i}: {hit.rank}"
        if i > 1:
            assert hits[i - 2].score >= hit.score, f"score increases at rank {i}"
