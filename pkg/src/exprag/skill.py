"""Agent-facing skill: analyze, route, retrieve, package."""

from __future__ import annotations

import time
from dataclasses import dataclass
from typing import Mapping, Sequence

from .config import Config, default_config
from .corpus import QueryRecord
from .errors import ExpragError, RetrievalError
from .memory import ExperienceMemory, make_record
from .pool import RetrieverPool, execute_strategy
from .ranking import RankedList, StrategyId
from .router import RoutingDecision, RoutingPolicy, route
from .scene import SceneFeatures, SkillRequest, analyze_scene

SNIPPET_CHARS = 300
ELLIPSIS = "…"


def make_snippet(text: str, limit: int = SNIPPET_CHARS) -> str:
    """First ``limit`` characters, cut back to a word boundary, plus an ellipsis when cut."""
    if len(text) <= limit:
        return text
    cut = text[:limit]
    if not text[limit].isspace() and " " in cut:
        cut = cut[: cut.rfind(" ")]
    return cut.rstrip() + ELLIPSIS


@dataclass(frozen=True)
class EvidenceItem:
    doc_id: str
    rank: int
    score: float
    title: str
    snippet: str

    def to_dict(self) -> dict:
        return {"doc_id": self.doc_id, "rank": self.rank, "score": self.score, "title": self.title, "snippet": self.snippet}


@dataclass(frozen=True)
class RetrievalPackage:
    query_id: str
    scene: SceneFeatures
    decision: RoutingDecision
    evidence: tuple[EvidenceItem, ...]
    elapsed: float
    pool_version: str

    def to_dict(self) -> dict:
        return {
            "query_id": self.query_id,
            "scene": self.scene.to_dict(),
            "decision": self.decision.to_dict(),
            "evidence": [e.to_dict() for e in self.evidence],
            "elapsed": self.elapsed,
            "pool_version": self.pool_version,
        }

    def format_text(self) -> str:
        d = self.decision
        lines = [
            f"query:      {self.query_id}",
            f"scene:      " + ", ".join(f"{k}={v}" for k, v in self.scene.to_dict().items()),
            f"strategy:   {d.strategy.value}  (policy={d.policy.value}, confidence={d.confidence:.3f})",
            f"why:        {d.explanation}",
            f"pool:       {self.pool_version}  elapsed={self.elapsed * 1000:.1f} ms",
            f"evidence:   {len(self.evidence)} item(s)",
        ]
        for e in self.evidence:
            head = f"{e.title} | " if e.title else ""
            lines.append(f"  {e.rank:>3}. {e.doc_id}  {e.score:.6f}  {head}{e.snippet}")
        return "\n".join(lines)


def package_result(
    query_id: str,
    scene: SceneFeatures,
    decision: RoutingDecision,
    hits: RankedList,
    elapsed: float,
    pool: RetrieverPool,
) -> RetrievalPackage:
    evidence = []
    for hit in sorted(hits, key=lambda h: h.rank):
        if hit.strategy is not decision.strategy:
            raise ValueError(f"hit {hit.doc_id} came from {hit.strategy.value}, decision was {decision.strategy.value}")
        doc = pool.documents.get(hit.doc_id)
        if doc is None:
            raise RetrievalError(f"hit references unknown doc {hit.doc_id!r} (index/corpus skew)", query_id)
        evidence.append(EvidenceItem(hit.doc_id, hit.rank, hit.score, doc.title, make_snippet(doc.text)))
    return RetrievalPackage(query_id, scene, decision, tuple(evidence), elapsed, pool.version)


def invoke_skill(
    request: SkillRequest,
    pool: RetrieverPool,
    memory: ExperienceMemory | None = None,
    policy: RoutingPolicy | str = RoutingPolicy.RULE,
    k: int = 10,
    config: Config | None = None,
) -> RetrievalPackage:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    config = config or default_config()
    start = time.perf_counter()
    scene = analyze_scene(request, config)
    decision = route(scene, memory, policy, config=config)
    qid = request.query.query_id
    try:
        hits = execute_strategy(decision.strategy, request.query.text, pool, k, query_id=qid)
    except RetrievalError:
        raise
    except (ExpragError, ValueError) as exc:
        raise RetrievalError(str(exc), qid) from exc
    return package_result(qid, scene, decision, hits, time.perf_counter() - start, pool)


def record_feedback(
    scene: SceneFeatures,
    per_strategy_scores: Mapping[StrategyId | str, float],
    memory: ExperienceMemory,
) -> ExperienceMemory:
    """Append an experience record; only call this when scores come from judgments."""
    return memory.append(make_record(scene, per_strategy_scores))


class ExperienceRagSkill:
    """Convenience wrapper holding the pool, memory and config.

    >>> skill = ExperienceRagSkill(pool)                      # doctest: +SKIP
    >>> skill.invoke("who wrote hamlet", metadata={"task_type": "direct"})  # doctest: +SKIP
    """

    def __init__(self, pool: RetrieverPool, memory: ExperienceMemory | None = None, config: Config | None = None):
        self.pool = pool
        self.memory = memory if memory is not None else ExperienceMemory()
        self.config = config or default_config()

    def invoke(
        self,
        query: str,
        history: Sequence[str] = (),
        metadata: Mapping[str, str] | None = None,
        policy: RoutingPolicy | str = RoutingPolicy.RULE,
        k: int = 10,
        query_id: str = "q",
    ) -> RetrievalPackage:
        request = SkillRequest(QueryRecord(query_id, query), tuple(history), metadata or {})
        return invoke_skill(request, self.pool, self.memory, policy, k, self.config)
