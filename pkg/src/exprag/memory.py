"""Experience records and the append-only memory that stores them.

File format (``experience.jsonl``): one JSON object per line, keys sorted,
no insignificant whitespace::

    {"best_margin":0.0175,"best_strategy":"hybrid_rrf",
     "created_at":"2026-01-01T00:00:00+00:00",
     "scene_features":{...},"score_vector":{"bm25":0.8426,...}}
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .errors import DataError, MalformedRecordError
from .ranking import STRATEGY_NAME_ORDER, StrategyId
from .scene import SceneFeatures, encode_features


def best_and_margin(scores: Mapping[StrategyId, float]) -> tuple[StrategyId, float]:
    """Argmax (ties by strategy name) and the gap to the runner-up."""
    ordered = sorted(scores, key=lambda s: (-scores[s], STRATEGY_NAME_ORDER.index(s)))
    best = ordered[0]
    margin = scores[best] - scores[ordered[1]] if len(ordered) > 1 else 0.0
    return best, margin


@dataclass(frozen=True)
class ExperienceRecord:
    scene_features: SceneFeatures
    score_vector: Mapping[StrategyId, float]
    best_strategy: StrategyId
    best_margin: float
    created_at: datetime = field(default_factory=lambda: datetime.now(timezone.utc))

    def to_json(self) -> str:
        obj = {
            "best_margin": self.best_margin,
            "best_strategy": self.best_strategy.value,
            "created_at": self.created_at.isoformat(),
            "scene_features": self.scene_features.to_dict(),
            "score_vector": {s.value: v for s, v in self.score_vector.items()},
        }
        return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)

    @classmethod
    def from_json(cls, line: str) -> "ExperienceRecord":
        obj = json.loads(line)
        scores = {StrategyId.parse(k): float(v) for k, v in obj["score_vector"].items()}
        _validate_scores(scores)
        record = cls(
            scene_features=SceneFeatures.from_dict(obj["scene_features"]),
            score_vector=scores,
            best_strategy=StrategyId.parse(obj["best_strategy"]),
            best_margin=float(obj["best_margin"]),
            created_at=datetime.fromisoformat(obj["created_at"]),
        )
        best, margin = best_and_margin(scores)
        if (best, margin) != (record.best_strategy, record.best_margin):
            raise ValueError("best_strategy/best_margin disagree with score_vector")
        return record


def _validate_scores(scores: Mapping[StrategyId, float]) -> None:
    if not scores:
        raise ValueError("score vector is empty")
    for s, v in scores.items():
        if not 0.0 <= v <= 1.0:
            raise ValueError(f"score for {s.value} is {v}, outside [0, 1]")


def make_record(
    scene: SceneFeatures,
    scores: Mapping[StrategyId | str, float],
    created_at: datetime | None = None,
) -> ExperienceRecord:
    # Canonical key order keeps serialized records stable.
    parsed = {StrategyId.parse(k): float(v) for k, v in scores.items()}
    parsed = {s: parsed[s] for s in STRATEGY_NAME_ORDER if s in parsed}
    _validate_scores(parsed)
    best, margin = best_and_margin(parsed)
    return ExperienceRecord(
        scene_features=scene,
        score_vector=parsed,
        best_strategy=best,
        best_margin=margin,
        created_at=created_at or datetime.now(timezone.utc),
    )


class ExperienceMemory:
    """Append-ordered records, optionally mirrored to a JSON-Lines file.

    One writer at a time; reads are safe to share.
    """

    def __init__(self, records: Iterable[ExperienceRecord] = (), path: str | os.PathLike | None = None):
        self._records: list[ExperienceRecord] = list(records)
        self.path = Path(path) if path is not None else None
        self._vectors: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self) -> Iterator[ExperienceRecord]:
        return iter(self._records)

    def __getitem__(self, i: int) -> ExperienceRecord:
        return self._records[i]

    def __eq__(self, other) -> bool:
        if not isinstance(other, ExperienceMemory):
            return NotImplemented
        return self._records == other._records

    @property
    def records(self) -> tuple[ExperienceRecord, ...]:
        return tuple(self._records)

    def vectors(self) -> np.ndarray:
        if self._vectors is None or len(self._vectors) != len(self._records):
            if self._records:
                self._vectors = np.vstack([encode_features(r.scene_features) for r in self._records])
            else:
                self._vectors = np.zeros((0, 12))
        return self._vectors

    def append(self, record: ExperienceRecord) -> "ExperienceMemory":
        if self.path is not None:
            line = record.to_json() + "\n"
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(line)
                fh.flush()
                os.fsync(fh.fileno())
        self._records.append(record)
        return self

    @classmethod
    def open(cls, path) -> "ExperienceMemory":
        """File-backed memory at ``path``; the file is created on first append."""
        path = Path(path)
        if path.exists():
            mem = load_memory(path)
            mem.path = path
            return mem
        return cls(path=path)


def append_record(memory: ExperienceMemory, record: ExperienceRecord) -> ExperienceMemory:
    return memory.append(record)


def save_memory(memory: ExperienceMemory, path) -> None:
    Path(path).write_text("".join(r.to_json() + "\n" for r in memory), encoding="utf-8")


def load_memory(path) -> ExperienceMemory:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    records = []
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(ExperienceRecord.from_json(line))
            except (ValueError, KeyError, TypeError) as exc:
                raise MalformedRecordError(path, line_no, f"bad experience record ({exc})") from exc
    return ExperienceMemory(records)


def nearest_records(memory: ExperienceMemory, scene: SceneFeatures, k: int) -> list[tuple[ExperienceRecord, float]]:
    """Up to ``k`` records by Euclidean distance of encoded scenes; ties go to newer records."""
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if len(memory) == 0:
        return []
    dists = np.sqrt(((memory.vectors() - encode_features(scene)) ** 2).sum(axis=1))
    n = len(memory)
    order = sorted(range(n), key=lambda i: (dists[i], -i))
    return [(memory[i], float(dists[i])) for i in order[:k]]
