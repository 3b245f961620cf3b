"""Strategy routing policies."""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from enum import Enum

from .config import Config, default_config
from .memory import ExperienceMemory, nearest_records
from .ranking import STRATEGY_NAME_ORDER, StrategyId
from .scene import SceneFeatures, TaskType


class RoutingPolicy(str, Enum):
    RULE = "rule"
    KNN_CLASSIFY = "knn_classify"
    SCORE_REGRESS = "score_regress"
    ADAPTIVE_STYLE = "adaptive_style"

    @classmethod
    def parse(cls, name: "str | RoutingPolicy") -> "RoutingPolicy":
        aliases = {"knn": cls.KNN_CLASSIFY, "regress": cls.SCORE_REGRESS}
        if isinstance(name, str) and name in aliases:
            return aliases[name]
        try:
            return cls(name)
        except ValueError:
            valid = ", ".join(p.value for p in cls)
            raise ValueError(f"unknown routing policy {name!r} (expected one of: {valid})") from None


@dataclass(frozen=True)
class RoutingDecision:
    strategy: StrategyId
    policy: RoutingPolicy
    confidence: float
    explanation: str

    def __post_init__(self):
        if not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence out of [0, 1]: {self.confidence}")
        if not self.explanation:
            raise ValueError("explanation must be non-empty")

    def to_dict(self) -> dict:
        return {
            "strategy": self.strategy.value,
            "policy": self.policy.value,
            "confidence": self.confidence,
            "explanation": self.explanation,
        }


RULE_TABLE: dict[TaskType, StrategyId] = {
    TaskType.DIRECT: StrategyId.DENSE,
    TaskType.MULTI_HOP: StrategyId.HYBRID_RRF,
    TaskType.SCIENTIFIC: StrategyId.HYBRID_RRF,
    TaskType.UNKNOWN: StrategyId.HYBRID_RRF,
}


def route_rule(s: SceneFeatures) -> RoutingDecision:
    strategy = RULE_TABLE[s.task_type]
    note = " (default)" if s.task_type is TaskType.UNKNOWN else ""
    return RoutingDecision(strategy, RoutingPolicy.RULE, 1.0, f"rule: task_type={s.task_type.value} -> {strategy.value}{note}")


def _fallback(s: SceneFeatures, policy: RoutingPolicy) -> RoutingDecision:
    rule = route_rule(s)
    return RoutingDecision(
        rule.strategy, policy, rule.confidence, f"fallback to rule routing (empty memory); {rule.explanation}"
    )


def _name_rank(s: StrategyId) -> int:
    return STRATEGY_NAME_ORDER.index(s)


def route_knn(s: SceneFeatures, memory: ExperienceMemory, k: int = 5) -> RoutingDecision:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    neighbors = nearest_records(memory, s, k)
    if not neighbors:
        return _fallback(s, RoutingPolicy.KNN_CLASSIFY)
    votes = Counter(rec.best_strategy for rec, _ in neighbors)
    winner = min(votes, key=lambda st: (-votes[st], _name_rank(st)))
    tally = ", ".join(f"{st.value}={votes[st]}" for st in sorted(votes, key=_name_rank))
    dists = ", ".join(f"{d:.3f}" for _, d in neighbors)
    return RoutingDecision(
        winner,
        RoutingPolicy.KNN_CLASSIFY,
        votes[winner] / len(neighbors),
        f"knn: {len(neighbors)} neighbors voted {tally}; distances [{dists}]",
    )


def route_regress(s: SceneFeatures, memory: ExperienceMemory, k: int = 5) -> RoutingDecision:
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    neighbors = nearest_records(memory, s, k)
    if not neighbors:
        return _fallback(s, RoutingPolicy.SCORE_REGRESS)
    sums: dict[StrategyId, float] = {}
    counts: Counter = Counter()
    for rec, _ in neighbors:
        for st, v in rec.score_vector.items():
            sums[st] = sums.get(st, 0.0) + v
            counts[st] += 1
    predicted = {st: sums[st] / counts[st] for st in sums}
    winner = min(predicted, key=lambda st: (-predicted[st], _name_rank(st)))
    shown = ", ".join(f"{st.value}={predicted[st]:.4f}" for st in sorted(predicted, key=_name_rank))
    return RoutingDecision(
        winner,
        RoutingPolicy.SCORE_REGRESS,
        min(1.0, max(0.0, predicted[winner])),
        f"regress: mean scores over {len(neighbors)} neighbors {shown}",
    )


def route_adaptive_style(s: SceneFeatures, threshold: float = 0.4) -> RoutingDecision:
    c = s.question_complexity
    strategy = StrategyId.HYBRID_RRF if c >= threshold else StrategyId.DENSE
    confidence = min(1.0, max(0.0, abs(c - threshold) / max(threshold, 1.0 - threshold)))
    op = ">=" if c >= threshold else "<"
    return RoutingDecision(
        strategy,
        RoutingPolicy.ADAPTIVE_STYLE,
        confidence,
        f"adaptive: complexity {c:.4f} {op} threshold {threshold} -> {strategy.value}",
    )


def route(
    s: SceneFeatures,
    memory: ExperienceMemory | None,
    policy: RoutingPolicy | str = RoutingPolicy.RULE,
    k: int | None = None,
    config: Config | None = None,
) -> RoutingDecision:
    policy = RoutingPolicy.parse(policy)
    if policy is RoutingPolicy.RULE:
        return route_rule(s)
    config = config or default_config()
    if policy is RoutingPolicy.ADAPTIVE_STYLE:
        return route_adaptive_style(s, config.adaptive_threshold)
    memory = memory if memory is not None else ExperienceMemory()
    k = k or config.router_k
    if policy is RoutingPolicy.KNN_CLASSIFY:
        return route_knn(s, memory, k)
    return route_regress(s, memory, k)
