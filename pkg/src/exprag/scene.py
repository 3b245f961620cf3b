"""Scene analysis: turn (query, history, metadata) into routing features."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from types import MappingProxyType
from typing import Mapping, Sequence

import numpy as np

from .config import Config, default_config
from .corpus import QueryRecord
from .text import tokenize

logger = logging.getLogger(__name__)


class TaskType(str, Enum):
    DIRECT = "direct"
    MULTI_HOP = "multi_hop"
    SCIENTIFIC = "scientific"
    UNKNOWN = "unknown"


class QueryStyle(str, Enum):
    INTERROGATIVE = "interrogative"
    DECLARATIVE = "declarative"
    KEYWORD = "keyword"


class DocumentStructure(str, Enum):
    PASSAGE = "passage"
    STRUCTURED = "structured"
    UNKNOWN = "unknown"


DATASET_TASKS = {
    "nq": TaskType.DIRECT,
    "hotpotqa": TaskType.MULTI_HOP,
    "scifact": TaskType.SCIENTIFIC,
}

WH_WORDS = frozenset("what who whom whose which when where why how".split())
AUXILIARIES = frozenset(
    "is are was were am do does did can could should would will shall may might must has have had".split()
)

# Small closed list: a short query containing any of these is not "keyword" style.
VERBS = frozenset(
    """
    is are was were be been being am do does did done has have had can could will would shall should
    may might must make makes made cause causes caused increase increases increased decrease decreases
    decreased reduce reduces reduced induce induces induced inhibit inhibits inhibited promote promotes
    promoted affect affects affected show shows showed shown contain contains contained use uses used
    win wins won write writes wrote written play plays played direct directs directed star stars
    starred born found founds founded discover discovers discovered lead leads led live lives lived
    die dies died marry marries married create creates created build builds built give gives gave
    given take takes took taken know knows knew known become becomes became occur occurs occurred
    require requires required regulate regulates regulated prevent prevents prevented improve improves
    improved activate activates activated express expresses expressed bind binds bound result results
    resulted associate associates associated develop develops developed include includes included
    """.split()
)

SCENE_VECTOR_DIM = 12
CONTEXT_LENGTH_CAP = 256


@dataclass(frozen=True)
class SceneFeatures:
    task_type: TaskType = TaskType.UNKNOWN
    domain: str = "unknown"
    context_length: int = 0
    question_complexity: float = 0.0
    query_style: QueryStyle = QueryStyle.DECLARATIVE
    document_structure: DocumentStructure = DocumentStructure.UNKNOWN

    def __post_init__(self):
        object.__setattr__(self, "task_type", TaskType(self.task_type))
        object.__setattr__(self, "query_style", QueryStyle(self.query_style))
        object.__setattr__(self, "document_structure", DocumentStructure(self.document_structure))
        if not 0.0 <= self.question_complexity <= 1.0:
            raise ValueError(f"question_complexity out of [0, 1]: {self.question_complexity}")
        if self.context_length < 0:
            raise ValueError("context_length must be >= 0")

    def to_dict(self) -> dict:
        return {
            "task_type": self.task_type.value,
            "domain": self.domain,
            "context_length": self.context_length,
            "question_complexity": self.question_complexity,
            "query_style": self.query_style.value,
            "document_structure": self.document_structure.value,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "SceneFeatures":
        return cls(
            task_type=data["task_type"],
            domain=str(data["domain"]),
            context_length=int(data["context_length"]),
            question_complexity=float(data["question_complexity"]),
            query_style=data["query_style"],
            document_structure=data["document_structure"],
        )


@dataclass(frozen=True)
class SkillRequest:
    query: QueryRecord
    history: tuple[str, ...] = ()
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "history", tuple(self.history))
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))

    @property
    def merged_metadata(self) -> dict[str, str]:
        """Query metadata overlaid with request metadata (request wins)."""
        return {**self.query.metadata, **self.metadata}


def _enum_or_none(enum_cls, value):
    try:
        return enum_cls(value.strip().lower()) if value is not None else None
    except ValueError:
        return None


def _dataset_task(tag: str | None) -> TaskType | None:
    if not tag:
        return None
    key = tag.strip().lower().removeprefix("beir/")
    return DATASET_TASKS.get(key)


def query_style(query: str) -> QueryStyle:
    tokens = tokenize(query)
    if query.rstrip().endswith("?") or (tokens and (tokens[0] in WH_WORDS or tokens[0] in AUXILIARIES)):
        return QueryStyle.INTERROGATIVE
    if len(tokens) <= 4 and not any(t in VERBS for t in tokens):
        return QueryStyle.KEYWORD
    return QueryStyle.DECLARATIVE


def has_multi_hop_cue(query: str, config: Config | None = None) -> bool:
    config = config or default_config()
    return any(p.search(query) for p in config.compiled("multi_hop_cues"))


def estimate_complexity(query: str, history: Sequence[str] = (), config: Config | None = None) -> float:
    config = config or default_config()
    tokens = tokenize(query)
    multi_hop = any(p.search(query) for p in config.compiled("multi_hop_cues"))
    comparison = any(p.search(query) for p in config.compiled("comparison_cues"))
    conj = min(sum(t in ("and", "or", "but") for t in tokens), config.conjunction_cap)
    free = config.length_free_tokens
    score = (
        config.w_multi_hop * multi_hop
        + config.w_comparison * comparison
        + config.w_conjunction * conj
        + config.w_length * max(0, len(tokens) - free) / free
        + config.w_history * bool(history)
    )
    return min(1.0, max(0.0, score))


def _infer_task(query: str, style: QueryStyle, config: Config) -> TaskType:
    if style is QueryStyle.DECLARATIVE:
        return TaskType.SCIENTIFIC
    if has_multi_hop_cue(query, config):
        return TaskType.MULTI_HOP
    return TaskType.DIRECT


def analyze_scene(request: SkillRequest, config: Config | None = None) -> SceneFeatures:
    """Build the scene for a request.

    Task type comes from metadata when valid, then from the dataset tag,
    then from text heuristics. Never raises: a failing heuristic degrades
    to ``unknown`` fields.
    """
    config = config or default_config()
    meta = request.merged_metadata
    text = request.query.text
    try:
        style = query_style(text)
        task = _enum_or_none(TaskType, meta.get("task_type")) or _dataset_task(request.query.dataset_tag)
        if task is None:
            task = _infer_task(text, style, config)
        complexity = estimate_complexity(text, request.history, config)
    except Exception:  # totality beats precision here
        logger.exception("scene analysis failed for %r", request.query.query_id)
        style, task, complexity = QueryStyle.DECLARATIVE, TaskType.UNKNOWN, 0.0
    context_length = len(tokenize(text)) + sum(len(tokenize(h)) for h in request.history)
    return SceneFeatures(
        task_type=task,
        domain=meta.get("domain") or request.query.dataset_tag or "unknown",
        context_length=context_length,
        question_complexity=complexity,
        query_style=style,
        document_structure=_enum_or_none(DocumentStructure, meta.get("document_structure"))
        or DocumentStructure.UNKNOWN,
    )


def encode_features(s: SceneFeatures) -> np.ndarray:
    """12-dim encoding: task, style and structure one-hots, then two scalars."""
    vec = np.zeros(SCENE_VECTOR_DIM, dtype=np.float64)
    vec[list(TaskType).index(s.task_type)] = 1.0
    vec[4 + list(QueryStyle).index(s.query_style)] = 1.0
    vec[7 + list(DocumentStructure).index(s.document_structure)] = 1.0
    vec[10] = min(s.context_length, CONTEXT_LENGTH_CAP) / CONTEXT_LENGTH_CAP
    vec[11] = s.question_complexity
    return vec
