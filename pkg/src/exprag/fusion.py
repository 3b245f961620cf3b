from __future__ import annotations

from typing import Sequence

from .ranking import RankedList, StrategyId, rank_scores

DEFAULT_K_RRF = 60


def fuse_rrf(lists: Sequence[RankedList], k_rrf: int = DEFAULT_K_RRF, k: int = 10) -> RankedList:
    """Reciprocal rank fusion: each list adds ``1 / (k_rrf + rank)`` per document."""
    if len(lists) < 2:
        raise ValueError(f"fusion needs at least 2 lists, got {len(lists)}")
    if k_rrf < 1:
        raise ValueError(f"k_rrf must be >= 1, got {k_rrf}")
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    fused: dict[str, float] = {}
    for hits in lists:
        for hit in hits:
            fused[hit.doc_id] = fused.get(hit.doc_id, 0.0) + 1.0 / (k_rrf + hit.rank)
    return rank_scores(fused.items(), k, StrategyId.HYBRID_RRF)
