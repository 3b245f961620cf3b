"""Loading and exporting BeIR-layout corpora, queries and qrels.

Corpus and query files are JSON-Lines (``_id``, ``title``, ``text`` and
``_id``, ``text``, optional ``metadata``); qrels are a three column TSV with
an optional ``query-id corpus-id score`` header. Everything is UTF-8.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from types import MappingProxyType
from typing import Iterable, Iterator, Mapping

from .errors import DataError, DuplicateIdError, MalformedRecordError

logger = logging.getLogger(__name__)

QRELS_HEADER = ("query-id", "corpus-id", "score")


@dataclass(frozen=True)
class Document:
    doc_id: str
    title: str
    text: str

    def __post_init__(self):
        if not self.doc_id:
            raise ValueError("doc_id must be non-empty")
        if not self.text and not self.title:
            raise ValueError(f"document {self.doc_id!r} has neither title nor text")

    @property
    def indexed_text(self) -> str:
        """Title and body joined by one space; this is what the indexes see."""
        if self.title and self.text:
            return f"{self.title} {self.text}"
        return self.title or self.text


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    text: str
    dataset_tag: str | None = None
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if not self.query_id:
            raise ValueError("query_id must be non-empty")
        if not self.text or not self.text.strip():
            raise ValueError(f"query {self.query_id!r} has empty text")
        object.__setattr__(self, "metadata", MappingProxyType(dict(self.metadata)))


class RelevanceJudgments:
    """Graded judgments keyed by query id, then doc id.

    Queries whose judgments are all zero are kept but reported through
    :attr:`judgment_free`; the evaluator skips them.
    """

    def __init__(self, grades: Mapping[str, Mapping[str, int]] | None = None):
        self._grades: dict[str, dict[str, int]] = {}
        for qid, docs in (grades or {}).items():
            for did, grade in docs.items():
                self.set(qid, did, grade)

    def set(self, query_id: str, doc_id: str, grade: int) -> None:
        if grade < 0:
            raise ValueError(f"negative grade for ({query_id}, {doc_id})")
        self._grades.setdefault(query_id, {})[doc_id] = int(grade)

    def grade(self, query_id: str, doc_id: str) -> int:
        return self._grades.get(query_id, {}).get(doc_id, 0)

    def for_query(self, query_id: str) -> Mapping[str, int]:
        return MappingProxyType(self._grades.get(query_id, {}))

    def relevant(self, query_id: str) -> set[str]:
        return {d for d, g in self._grades.get(query_id, {}).items() if g > 0}

    @property
    def query_ids(self) -> list[str]:
        return list(self._grades)

    @property
    def judgment_free(self) -> set[str]:
        return {q for q in self._grades if not self.relevant(q)}

    def items(self) -> Iterator[tuple[str, str, int]]:
        for qid, docs in self._grades.items():
            for did, grade in docs.items():
                yield qid, did, grade

    def __len__(self) -> int:
        return sum(len(d) for d in self._grades.values())

    def __contains__(self, query_id: str) -> bool:
        return query_id in self._grades

    def __eq__(self, other) -> bool:
        if not isinstance(other, RelevanceJudgments):
            return NotImplemented
        return self._grades == other._grades

    def __repr__(self) -> str:
        return f"RelevanceJudgments({len(self._grades)} queries, {len(self)} judgments)"


def _read_lines(path) -> Iterator[tuple[int, str]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    try:
        raw = path.read_bytes().decode("utf-8")
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: invalid UTF-8 at byte {exc.start}") from exc
    # Split on "\n" only: str.splitlines would also break on U+0085, U+2028 etc.
    # which JSON strings may legitimately contain.
    for line_no, line in enumerate(raw.split("\n"), start=1):
        line = line.removesuffix("\r")
        if line.strip():
            yield line_no, line


def _parse_json_object(path, line_no: int, line: str) -> dict:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise MalformedRecordError(path, line_no, f"invalid JSON ({exc.msg})") from exc
    if not isinstance(obj, dict):
        raise MalformedRecordError(path, line_no, "record is not a JSON object")
    return obj


def _require_str(path, line_no: int, obj: dict, key: str, required: bool = True) -> str:
    value = obj.get(key)
    if value is None:
        if required:
            raise MalformedRecordError(path, line_no, f"missing field {key!r}")
        return ""
    if not isinstance(value, (str, int)) or isinstance(value, bool):
        raise MalformedRecordError(path, line_no, f"field {key!r} must be a string")
    return str(value)


def load_corpus(path) -> list[Document]:
    """Read a BeIR ``corpus.jsonl`` into documents, preserving file order."""
    docs: list[Document] = []
    seen: set[str] = set()
    for line_no, line in _read_lines(path):
        obj = _parse_json_object(path, line_no, line)
        doc_id = _require_str(path, line_no, obj, "_id")
        title = _require_str(path, line_no, obj, "title", required=False)
        text = _require_str(path, line_no, obj, "text", required=False)
        if doc_id in seen:
            raise DuplicateIdError(path, line_no, doc_id)
        try:
            docs.append(Document(doc_id, title, text))
        except ValueError as exc:
            raise MalformedRecordError(path, line_no, str(exc)) from exc
        seen.add(doc_id)
    return docs


def load_queries(path, dataset_tag: str | None = None) -> list[QueryRecord]:
    """Read a BeIR ``queries.jsonl``; metadata values are coerced to strings."""
    queries: list[QueryRecord] = []
    seen: set[str] = set()
    for line_no, line in _read_lines(path):
        obj = _parse_json_object(path, line_no, line)
        query_id = _require_str(path, line_no, obj, "_id")
        text = _require_str(path, line_no, obj, "text")
        metadata = obj.get("metadata") or {}
        if not isinstance(metadata, dict):
            raise MalformedRecordError(path, line_no, "metadata must be an object")
        if query_id in seen:
            raise DuplicateIdError(path, line_no, query_id)
        try:
            queries.append(
                QueryRecord(
                    query_id,
                    text,
                    dataset_tag=dataset_tag,
                    metadata={str(k): str(v) for k, v in metadata.items()},
                )
            )
        except ValueError as exc:
            raise MalformedRecordError(path, line_no, str(exc)) from exc
        seen.add(query_id)
    return queries


def load_qrels(path) -> RelevanceJudgments:
    qrels = RelevanceJudgments()
    first = True
    for line_no, line in _read_lines(path):
        cols = line.rstrip("\r\n").split("\t")
        if first:
            first = False
            if tuple(c.strip().lower() for c in cols[:3]) == QRELS_HEADER:
                continue
        if len(cols) < 3:
            raise MalformedRecordError(path, line_no, f"expected 3 columns, got {len(cols)}")
        qid, did, raw = cols[0].strip(), cols[1].strip(), cols[2].strip()
        try:
            grade = int(raw)
        except ValueError:
            raise MalformedRecordError(path, line_no, f"score {raw!r} is not an integer") from None
        if grade < 0:
            raise MalformedRecordError(path, line_no, f"negative score {grade}")
        if not qid or not did:
            raise MalformedRecordError(path, line_no, "empty query or corpus id")
        if did in qrels.for_query(qid):
            logger.warning("%s:%d: duplicate judgment (%s, %s) overrides earlier grade", path, line_no, qid, did)
        qrels.set(qid, did, grade)
    return qrels


def dangling_references(qrels: RelevanceJudgments, docs: Iterable[Document]) -> list[str]:
    """Doc ids judged in ``qrels`` but missing from ``docs``, each reported once.

    Dangling ids are expected with sampled corpora, so this warns instead of
    raising.
    """
    known = {d.doc_id for d in docs}
    missing = sorted({did for _, did, _ in qrels.items() if did not in known})
    for did in missing:
        logger.warning("qrels reference doc %r which is not in the corpus", did)
    return missing


def write_corpus(docs: Iterable[Document], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for d in docs:
            fh.write(json.dumps({"_id": d.doc_id, "title": d.title, "text": d.text}, ensure_ascii=False))
            fh.write("\n")


def write_queries(queries: Iterable[QueryRecord], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for q in queries:
            obj: dict = {"_id": q.query_id, "text": q.text}
            if q.metadata:
                obj["metadata"] = dict(q.metadata)
            fh.write(json.dumps(obj, ensure_ascii=False))
            fh.write("\n")


def write_qrels(qrels: RelevanceJudgments, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(QRELS_HEADER) + "\n")
        for qid, did, grade in qrels.items():
            fh.write(f"{qid}\t{did}\t{grade}\n")
