"""Evaluation harness: fixed strategies, skill policies, comparison tables, run files."""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from .config import Config, default_config
from .corpus import QueryRecord, RelevanceJudgments, dangling_references, load_corpus, load_qrels, load_queries
from .dense import load_embeddings
from .errors import DataError
from .memory import ExperienceMemory
from .metrics import MetricSet, mrr_at_k, ndcg_at_k, recall_at_k
from .pool import RetrieverPool, build_pool, execute_strategy, load_index
from .ranking import RankedHit, RankedList, StrategyId
from .router import RoutingPolicy
from .scene import SkillRequest, analyze_scene
from .skill import invoke_skill, record_feedback

logger = logging.getLogger(__name__)

FIXED_METHODS = tuple(f"fixed:{s.value}" for s in StrategyId)
SKILL_METHODS = ("skill:rule", "skill:knn", "skill:regress", "skill:adaptive_style")
METHODS = FIXED_METHODS + SKILL_METHODS
ABLATION_METHODS = ("skill:rule", "fixed:hybrid_rrf", "fixed:dense", "fixed:bm25")


@dataclass
class Dataset:
    name: str
    queries: list[QueryRecord]
    qrels: RelevanceJudgments
    pool: RetrieverPool

    def judged(self) -> list[QueryRecord]:
        return [q for q in self.queries if self.qrels.relevant(q.query_id)]


def load_dataset(
    name: str,
    corpus_path,
    queries_path,
    qrels_path,
    *,
    config: Config | None = None,
    embeddings=None,
    query_embeddings=None,
    dataset_tag: str | None = None,
) -> Dataset:
    """Load BeIR files and build a pool.

    ``embeddings`` may hold both document and query vectors; ids that are
    not documents are treated as query vectors unless ``query_embeddings``
    is given separately.
    """
    config = config or default_config()
    docs = load_corpus(corpus_path)
    queries = load_queries(queries_path, dataset_tag=dataset_tag or name)
    qrels = load_qrels(qrels_path)
    dangling_references(qrels, docs)
    vectors = qvectors = None
    if embeddings is not None:
        all_vecs = load_embeddings(embeddings)
        doc_ids = {d.doc_id for d in docs}
        vectors = {i: v for i, v in all_vecs.items() if i in doc_ids}
        qvectors = {i: v for i, v in all_vecs.items() if i not in doc_ids}
    if query_embeddings is not None:
        qvectors = load_embeddings(query_embeddings)
    pool = build_pool(
        docs,
        dim=config.dim,
        k_rrf=config.k_rrf,
        depth=config.depth,
        vectors=vectors,
        query_vectors=qvectors,
        embedder=f"external:{Path(embeddings).name}" if embeddings is not None else None,
    )
    return Dataset(name, queries, qrels, pool)


def load_dataset_dir(directory, name: str | None = None, config: Config | None = None, **kwargs) -> Dataset:
    d = Path(directory)
    return load_dataset(
        name or d.name, d / "corpus.jsonl", d / "queries.jsonl", d / "qrels.tsv", config=config, **kwargs
    )


def dataset_from_index(index_dir, queries_path, qrels_path, name: str | None = None) -> Dataset:
    """Pair a saved index with query and qrels files; ``name`` defaults to the queries' directory."""
    name = name or Path(queries_path).resolve().parent.name
    pool = load_index(index_dir)
    qrels = load_qrels(qrels_path)
    dangling_references(qrels, pool.documents.values())
    return Dataset(name, load_queries(queries_path, dataset_tag=name), qrels, pool)


@dataclass(frozen=True)
class QueryScores:
    recall: float
    mrr: float
    ndcg: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.recall, self.mrr, self.ndcg)


def score_ranking(ranked: Sequence[str], judgments: Mapping[str, int], k: int) -> QueryScores:
    return QueryScores(
        recall_at_k(ranked, judgments, k),
        mrr_at_k(ranked, judgments, k),
        ndcg_at_k(ranked, judgments, k),
    )


@dataclass
class RunResult:
    method: str
    k: int
    per_dataset: dict[str, MetricSet]
    overall: MetricSet
    per_query: dict[tuple[str, str], QueryScores]
    skipped: int = 0
    hits: dict[tuple[str, str], RankedList] = field(default_factory=dict, repr=False)
    routes: dict[tuple[str, str], StrategyId] = field(default_factory=dict, repr=False)


def parse_method(method: str) -> tuple[str, StrategyId | RoutingPolicy]:
    kind, _, name = method.partition(":")
    if kind == "fixed":
        return kind, StrategyId.parse(name)
    if kind == "skill":
        return kind, RoutingPolicy.parse(name)
    raise ValueError(f"unknown method {method!r} (expected one of: {', '.join(METHODS)})")


def retrieve(
    method: str, query: QueryRecord, pool: RetrieverPool, k: int, memory, config
) -> tuple[RankedList, StrategyId]:
    kind, target = parse_method(method)
    if kind == "fixed":
        return execute_strategy(target, query.text, pool, k, query_id=query.query_id), target
    package = invoke_skill(SkillRequest(query), pool, memory, target, k, config)
    strategy = package.decision.strategy
    return [RankedHit(e.doc_id, e.rank, e.score, strategy) for e in package.evidence], strategy


def evaluate_method(
    method: str,
    datasets: Sequence[Dataset],
    k: int = 10,
    memory: ExperienceMemory | None = None,
    config: Config | None = None,
) -> RunResult:
    """Score ``method`` on every judged query of every dataset.

    Queries without a relevant judgment are skipped and counted. Overall
    metrics are the unweighted mean over all judged queries pooled across
    datasets.
    """
    parse_method(method)
    config = config or default_config()
    per_query: dict[tuple[str, str], QueryScores] = {}
    per_dataset: dict[str, MetricSet] = {}
    all_hits: dict[tuple[str, str], RankedList] = {}
    routes: dict[tuple[str, str], StrategyId] = {}
    skipped = 0
    for ds in datasets:
        rows = []
        for q in sorted(ds.queries, key=lambda q: q.query_id):
            judgments = ds.qrels.for_query(q.query_id)
            if not any(g > 0 for g in judgments.values()):
                skipped += 1
                continue
            hits, strategy = retrieve(method, q, ds.pool, k, memory, config)
            scores = score_ranking([h.doc_id for h in hits], judgments, k)
            per_query[(ds.name, q.query_id)] = scores
            all_hits[(ds.name, q.query_id)] = hits
            routes[(ds.name, q.query_id)] = strategy
            rows.append(scores.as_tuple())
        if not rows:
            raise DataError(f"dataset {ds.name!r} has no judged queries")
        per_dataset[ds.name] = MetricSet.mean_of(rows, k)
    overall = MetricSet.mean_of([s.as_tuple() for s in per_query.values()], k)
    if skipped:
        logger.info("%s: skipped %d queries without relevant judgments", method, skipped)
    return RunResult(method, k, per_dataset, overall, per_query, skipped, all_hits, routes)


def strategy_scores(ds: Dataset, query: QueryRecord, k: int = 10) -> dict[StrategyId, float]:
    """Per-strategy nDCG@k for one judged query."""
    judgments = ds.qrels.for_query(query.query_id)
    out = {}
    for s in StrategyId:
        hits = execute_strategy(s, query.text, ds.pool, k, query_id=query.query_id)
        out[s] = ndcg_at_k([h.doc_id for h in hits], judgments, k)
    return out


def collect_experience(
    datasets: Sequence[Dataset], memory: ExperienceMemory, k: int = 10, config: Config | None = None
) -> ExperienceMemory:
    """Evaluate every judged query under all strategies and record the outcome."""
    config = config or default_config()
    for ds in datasets:
        for q in ds.judged():
            scene = analyze_scene(SkillRequest(q), config)
            record_feedback(scene, strategy_scores(ds, q, k), memory)
    return memory


@dataclass(frozen=True)
class ComparisonRow:
    method: str
    metrics: MetricSet
    best: tuple[bool, bool, bool]


@dataclass(frozen=True)
class ComparisonTable:
    rows: tuple[ComparisonRow, ...]
    k: int

    @classmethod
    def from_metrics(cls, named: Iterable[tuple[str, MetricSet]]) -> "ComparisonTable":
        named = sorted(named, key=lambda p: (-p[1].ndcg_at_k, p[0]))
        if not named:
            raise ValueError("nothing to compare")
        k = named[0][1].k
        cols = [
            max(m.recall_at_k for _, m in named),
            max(m.mrr_at_k for _, m in named),
            max(m.ndcg_at_k for _, m in named),
        ]
        rows = tuple(
            ComparisonRow(name, m, (m.recall_at_k == cols[0], m.mrr_at_k == cols[1], m.ndcg_at_k == cols[2]))
            for name, m in named
        )
        return cls(rows, k)

    @property
    def methods(self) -> list[str]:
        return [r.method for r in self.rows]

    def format_text(self) -> str:
        k = self.k
        header = ("Method", f"Recall@{k}", f"MRR@{k}", f"nDCG@{k}", "Queries")
        body = []
        for r in self.rows:
            vals = (r.metrics.recall_at_k, r.metrics.mrr_at_k, r.metrics.ndcg_at_k)
            cells = [f"{v:.4f}{'*' if b else ' '}" for v, b in zip(vals, r.best)]
            body.append((r.method, *cells, str(r.metrics.query_count)))
        widths = [max(len(row[i]) for row in [header, *body]) for i in range(len(header))]
        lines = []
        for row in [header, *body]:
            lines.append("  ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(row, widths))))
        lines.insert(1, "  ".join("-" * w for w in widths))
        lines.append("(* = best in column)")
        return "\n".join(lines)

    def to_csv(self) -> str:
        k = self.k
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", f"recall@{k}", f"mrr@{k}", f"ndcg@{k}", "queries", "best_recall", "best_mrr", "best_ndcg"])
        for r in self.rows:
            m = r.metrics
            w.writerow(
                [r.method, f"{m.recall_at_k:.6f}", f"{m.mrr_at_k:.6f}", f"{m.ndcg_at_k:.6f}", m.query_count]
                + [int(b) for b in r.best]
            )
        return buf.getvalue()


def compare_methods(results: Sequence[RunResult]) -> ComparisonTable:
    return ComparisonTable.from_metrics((r.method, r.overall) for r in results)


def format_breakdown(results: Sequence[RunResult]) -> str:
    """Per-dataset nDCG@k for each method, one column per dataset."""
    if not results:
        return ""
    names = list(results[0].per_dataset)
    k = results[0].k
    width = max(len(r.method) for r in results)
    head = "Method".ljust(width) + "".join(f"  {n[:12]:>12}" for n in names)
    lines = [f"nDCG@{k} per dataset", head]
    for r in results:
        lines.append(r.method.ljust(width) + "".join(f"  {r.per_dataset[n].ndcg_at_k:>12.4f}" for n in names))
    return "\n".join(lines)


def run_ablation(
    datasets: Sequence[Dataset],
    memory: ExperienceMemory | None = None,
    k: int = 10,
    config: Config | None = None,
    methods: Sequence[str] = ABLATION_METHODS,
) -> ComparisonTable:
    table, _ = ablation_results(datasets, memory, k, config, methods)
    return table


def ablation_results(datasets, memory=None, k=10, config=None, methods=ABLATION_METHODS):
    results = [evaluate_method(m, datasets, k, memory, config) for m in methods]
    return compare_methods(results), results


# ---- TREC-style run files ---------------------------------------------------


def write_run(hits_by_query: Mapping[str, RankedList], method: str, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for qid in sorted(hits_by_query):
            for h in hits_by_query[qid]:
                fh.write(f"{qid}\t{h.doc_id}\t{h.rank}\t{h.score!r}\t{method}\n")


def read_run(path) -> tuple[str, dict[str, list[str]]]:
    path = Path(path)
    if not path.is_file():
        raise DataError(f"no such file: {path}")
    rows: dict[str, list[tuple[int, str]]] = {}
    methods = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            cols = line.rstrip("\n").split("\t")
            if len(cols) != 5:
                raise DataError(f"{path}:{line_no}: expected 5 tab-separated columns")
            qid, did, rank, _score, method = cols
            try:
                rows.setdefault(qid, []).append((int(rank), did))
            except ValueError:
                raise DataError(f"{path}:{line_no}: rank {rank!r} is not an integer") from None
            methods.add(method)
    if len(methods) > 1:
        raise DataError(f"{path}: mixes methods {sorted(methods)}")
    method = methods.pop() if methods else path.stem
    return method, {q: [d for _, d in sorted(r)] for q, r in rows.items()}


def evaluate_run(
    run: Mapping[str, Sequence[str]],
    qrels: RelevanceJudgments,
    k: int = 10,
    query_ids: Iterable[str] | None = None,
) -> tuple[MetricSet, dict[str, QueryScores], int]:
    """Score a run against qrels.

    Without ``query_ids`` only judged queries present in the run are scored
    (a run file cannot express an empty result); pass the query ids to count
    empty results as zeros.
    """
    candidates = list(query_ids) if query_ids is not None else list(run)
    per_query: dict[str, QueryScores] = {}
    skipped = 0
    for qid in sorted(candidates):
        judgments = qrels.for_query(qid)
        if not any(g > 0 for g in judgments.values()):
            skipped += 1
            continue
        per_query[qid] = score_ranking(list(run.get(qid, ())), judgments, k)
    if not per_query:
        raise DataError("no judged queries to evaluate")
    return MetricSet.mean_of([s.as_tuple() for s in per_query.values()], k), per_query, skipped
