"""Deterministic three-task mini benchmark with task-dependent best strategies.

Documents are built from pseudo-words over two disjoint consonant sets:
filler words never share a character trigram with the "content" stems and
codes that queries ask about, so every retrieval signal is planted.

direct
    Half the queries share their rare stems verbatim with the single
    relevant document (every strategy finds it). The other half use an
    inflected form of the stems (only trigram overlap survives) plus a short
    hook code that pulls lexical distractors into BM25, and therefore into the
    fused list ahead of the relevant document. Dense wins.
multi_hop / scientific
    The relevant document holds one of two query codes plus one inflected
    stem. A lexical distractor holds both codes (BM25 rank 1), dense
    distractors hold the inflected stems (dense rank 1 and below), so the
    relevant document is second in both lists and first only after fusion.
    A quarter of the queries are easy (everything in one document).
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path

from .corpus import Document, QueryRecord, RelevanceJudgments, write_corpus, write_qrels, write_queries

TASKS = ("direct", "multi_hop", "scientific")
FAVORED = {"direct": "dense", "multi_hop": "hybrid_rrf", "scientific": "hybrid_rrf"}
MIN_SIZE = 10
FILLER_VOCABULARY = 80
STEM_SYLLABLES = 5

# Neither set occurs in the English query templates, so template words
# cannot share trigrams with planted or filler words.
CONTENT_CONSONANTS = "bgpz"
FILLER_CONSONANTS = "jmqxy"
VOWELS = "aeiou"

STRUCTURE = {"direct": "passage", "multi_hop": "passage", "scientific": "structured"}


@dataclass(frozen=True)
class TaskProfile:
    """Shape knobs for one task family."""

    filler_words: tuple[int, int] = (20, 40)
    easy_fraction: float = 0.0
    lexical_distractor_padding: int = 40
    hook_distractors: int = 2
    stem_repeats: int = 1


DEFAULT_PROFILES = {
    "direct": TaskProfile(filler_words=(10, 25)),
    "multi_hop": TaskProfile(filler_words=(12, 25), easy_fraction=0.25, lexical_distractor_padding=30),
    "scientific": TaskProfile(filler_words=(15, 30), easy_fraction=0.25, lexical_distractor_padding=40),
}


@dataclass(frozen=True)
class BenchmarkSpec:
    seed: int = 7
    queries_per_task: int = 40
    corpus_size_per_task: int = 300
    profiles: dict = field(default_factory=lambda: dict(DEFAULT_PROFILES))

    def __post_init__(self):
        if self.queries_per_task < MIN_SIZE or self.corpus_size_per_task < MIN_SIZE:
            raise ValueError(f"queries and corpus size per task must be >= {MIN_SIZE}")
        # worst case: five planted documents per query
        if self.corpus_size_per_task < 5 * self.queries_per_task:
            raise ValueError(
                f"corpus_size_per_task={self.corpus_size_per_task} is too small for "
                f"{self.queries_per_task} queries (need >= {5 * self.queries_per_task})"
            )


@dataclass
class TaskData:
    task: str
    documents: list[Document]
    queries: list[QueryRecord]
    qrels: RelevanceJudgments


class _Words:
    """Unique pseudo-word source for one task."""

    def __init__(self, rng: random.Random):
        self.rng = rng
        self.used: set[str] = set()
        self.filler = [self._fresh(FILLER_CONSONANTS, self.rng.randint(2, 3)) for _ in range(FILLER_VOCABULARY)]

    def _fresh(self, consonants: str, syllables: int) -> str:
        while True:
            w = "".join(self.rng.choice(consonants) + self.rng.choice(VOWELS) for _ in range(syllables))
            if w not in self.used:
                self.used.add(w)
                return w

    def stem(self) -> str:
        return self._fresh(CONTENT_CONSONANTS, STEM_SYLLABLES)

    def code(self) -> str:
        while True:
            w = self.rng.choice(CONTENT_CONSONANTS) + f"{self.rng.randint(0, 99):02d}"
            if w not in self.used:
                self.used.add(w)
                return w

    def fill(self, n: int) -> list[str]:
        return [self.rng.choice(self.filler) for _ in range(n)]

    def title(self) -> str:
        return " ".join(w.capitalize() for w in self.fill(2))


def _body(words: _Words, planted: list[str], n_filler: int) -> str:
    tokens = words.fill(n_filler) + planted
    words.rng.shuffle(tokens)
    return " ".join(tokens)


def _generate_task(task: str, spec: BenchmarkSpec) -> TaskData:
    rng = random.Random(f"exprag-synth:{spec.seed}:{task}")
    words = _Words(rng)
    prof: TaskProfile = spec.profiles[task]
    lo, hi = prof.filler_words
    planted: list[tuple[str, list[str], int]] = []  # (role, planted tokens, extra filler)
    queries: list[tuple[str, str]] = []
    relevant_index: list[int] = []

    def add(role: str, tokens: list[str], extra: int = 0) -> int:
        planted.append((role, tokens, extra))
        return len(planted) - 1

    for i in range(spec.queries_per_task):
        if task == "direct":
            a, b = words.stem(), words.stem()
            if i % 2 == 0:
                rel = add("relevant", [a, b])
                text = rng.choice([f"what is the {a} {b}?", f"{a} {b}", f"who discovered the {a} {b}?"])
            else:
                hook = words.code()
                rel = add("relevant", [a + "ed", b + "ed"] * prof.stem_repeats)
                for _ in range(prof.hook_distractors):
                    add("hook", [hook])
                text = rng.choice([f"{a}ing {b}ing {hook}", f"what is the {a}ing {b}ing {hook}?"])
        else:
            c1, c2 = words.code(), words.code()
            p1, p2 = words.stem(), words.stem()
            if task == "multi_hop":
                text = rng.choice(
                    [
                        f"which {p1}ing is linked to {c1} that {p2}ing of {c2}?",
                        f"what is the {p1}ing of the {c1} of {p2}ing {c2}?",
                        f"who founded the {p1}ing that {c1} and {c2} {p2}ing?",
                    ]
                )
            else:
                text = rng.choice(
                    [
                        f"{p1}ing {c1} increases {p2}ing in {c2}",
                        f"{c1} {p1}ing reduces {p2}ing and {c2} levels",
                        f"{p1}ing in {c1} cells is associated with {p2}ing of {c2}",
                    ]
                )
            if rng.random() < prof.easy_fraction:
                rel = add("relevant", [c1, c2, p1 + "ed", p2 + "ed"])
            else:
                rel = add("relevant", [c1] + [p1 + "ed"] * prof.stem_repeats)
                add("lexical", [c1, c2], prof.lexical_distractor_padding)
                add("dense", [p1 + "ed", p2 + "ed"])
                add("dense", [p2 + "ed", p2 + "er"])
                add("dense", [p2 + "s", p2 + "ed"])
        queries.append((text, "relevant"))
        relevant_index.append(rel)

    if len(planted) > spec.corpus_size_per_task:
        raise ValueError(f"{task}: {len(planted)} planted documents exceed corpus size {spec.corpus_size_per_task}")
    while len(planted) < spec.corpus_size_per_task:
        add("filler", [])

    # Shuffle so doc ids carry no information about roles.
    order = list(range(len(planted)))
    rng.shuffle(order)
    prefix = {"direct": "dr", "multi_hop": "mh", "scientific": "sf"}[task]
    doc_id_of = {}
    documents: list[Document] = []
    for pos, idx in enumerate(order):
        role, tokens, extra = planted[idx]
        doc_id = f"{prefix}-d{pos:04d}"
        doc_id_of[idx] = doc_id
        documents.append(Document(doc_id, words.title(), _body(words, tokens, rng.randint(lo, hi) + extra)))
    documents.sort(key=lambda d: d.doc_id)

    qrels = RelevanceJudgments()
    records = []
    meta = {"task_type": task, "domain": f"synthetic-{task}", "document_structure": STRUCTURE[task]}
    for i, ((text, _), rel) in enumerate(zip(queries, relevant_index)):
        qid = f"{prefix}-q{i:03d}"
        records.append(QueryRecord(qid, text, dataset_tag=task, metadata=meta))
        qrels.set(qid, doc_id_of[rel], 1)
    return TaskData(task, documents, records, qrels)


def generate_tasks(spec: BenchmarkSpec | None = None) -> dict[str, TaskData]:
    spec = spec or BenchmarkSpec()
    return {task: _generate_task(task, spec) for task in TASKS}


def generate_benchmark(spec: BenchmarkSpec | None, out_dir, evaluate: bool = True) -> Path:
    """Write ``<out>/<task>/{corpus.jsonl,queries.jsonl,qrels.tsv}`` and ``manifest.tsv``.

    With ``evaluate`` the manifest margin is measured by running every fixed
    strategy; otherwise it is left blank.
    """
    spec = spec or BenchmarkSpec()
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = generate_tasks(spec)
    for task, data in tasks.items():
        d = out / task
        d.mkdir(exist_ok=True)
        write_corpus(data.documents, d / "corpus.jsonl")
        write_queries(data.queries, d / "queries.jsonl")
        write_qrels(data.qrels, d / "qrels.tsv")
    margins = measure_margins(out) if evaluate else {}
    with open(out / "manifest.tsv", "w", encoding="utf-8", newline="\n") as fh:
        fh.write("task\tfavored_strategy\tmargin\n")
        for task in TASKS:
            m = margins.get(task)
            fh.write(f"{task}\t{FAVORED[task]}\t{'' if m is None else f'{m:.6f}'}\n")
    return out


def measure_margins(bench_dir) -> dict[str, float]:
    """nDCG@10 of the favored fixed strategy minus the best other fixed strategy, per task."""
    from .harness import FIXED_METHODS, evaluate_method, load_dataset_dir

    out = {}
    for task in TASKS:
        ds = load_dataset_dir(Path(bench_dir) / task)
        scores = {m.split(":")[1]: evaluate_method(m, [ds]).overall.ndcg_at_k for m in FIXED_METHODS}
        fav = scores.pop(FAVORED[task])
        out[task] = fav - max(scores.values())
    return out


def read_manifest(path) -> dict[str, tuple[str, float | None]]:
    rows = {}
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    for line in lines[1:]:
        task, strategy, margin = line.split("\t")
        rows[task] = (strategy, float(margin) if margin else None)
    return rows
