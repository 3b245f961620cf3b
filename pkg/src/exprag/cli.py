"""``exprag`` command line: index, run, eval, compare, ablation, route, serve-batch, synth.

Exit codes: 0 success, 1 usage error, 2 data error.
"""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from . import __version__
from .config import ENV_VAR, Config, load_config
from .corpus import QueryRecord, load_corpus, load_qrels, load_queries
from .dense import load_embeddings
from .errors import ExpragError
from .harness import (
    ABLATION_METHODS,
    METHODS,
    Dataset,
    ComparisonTable,
    ablation_results,
    collect_experience,
    dataset_from_index,
    evaluate_run,
    format_breakdown,
    load_dataset_dir,
    read_run,
    retrieve,
    write_run,
)
from .memory import ExperienceMemory, load_memory
from .pool import build_pool, load_index, save_index
from .router import RoutingPolicy
from .scene import DocumentStructure, SkillRequest, TaskType
from .skill import invoke_skill
from .synth import TASKS, BenchmarkSpec, generate_benchmark, read_manifest

EXIT_USAGE = 1
EXIT_DATA = 2

POLICIES = [p.value for p in RoutingPolicy] + ["knn", "regress"]
existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)
existing_dir = click.Path(exists=True, file_okay=False, path_type=Path)


def _config(ctx: click.Context) -> Config:
    return ctx.find_root().obj


def _memory(path: Path | None) -> ExperienceMemory | None:
    return load_memory(path) if path is not None else None


@click.group()
@click.version_option(__version__, prog_name="exprag")
@click.option(
    "--config",
    "config_path",
    type=existing_file,
    envvar=ENV_VAR,
    help=f"Config file (key = value). Defaults to ${ENV_VAR}, then the bundled defaults.",
)
@click.option("-v", "--verbose", is_flag=True, help="Log progress to stderr.")
@click.pass_context
def cli(ctx: click.Context, config_path: Path | None, verbose: bool) -> None:
    """Scene-aware retrieval routing over a BM25 / dense / hybrid retriever pool."""
    logging.basicConfig(
        level=logging.INFO if verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    ctx.obj = load_config(config_path)


@cli.command()
@click.option("--corpus", type=existing_file, required=True, help="BeIR corpus.jsonl.")
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True, help="Index directory.")
@click.option(
    "--embeddings",
    type=existing_file,
    help='JSON-Lines {"_id", "vector"}; ids that are not documents are kept as query vectors.',
)
@click.pass_context
def index(ctx, corpus: Path, out: Path, embeddings: Path | None) -> None:
    """Build the retriever pool for a corpus and save it."""
    cfg = _config(ctx)
    docs = load_corpus(corpus)
    vectors = qvectors = embedder = None
    if embeddings is not None:
        all_vecs = load_embeddings(embeddings)
        ids = {d.doc_id for d in docs}
        vectors = {i: v for i, v in all_vecs.items() if i in ids}
        qvectors = {i: v for i, v in all_vecs.items() if i not in ids}
        embedder = f"external:{embeddings.name}"
    pool = build_pool(
        docs, dim=cfg.dim, k_rrf=cfg.k_rrf, depth=cfg.depth, vectors=vectors, query_vectors=qvectors, embedder=embedder
    )
    save_index(pool, out)
    click.echo(f"indexed {len(docs)} documents -> {out} (embedder={pool.vector.embedder}, version={pool.version})")


@cli.command()
@click.option("--index", "index_dir", type=existing_dir, required=True)
@click.option("--queries", type=existing_file, required=True)
@click.option("--method", type=click.Choice(METHODS), required=True)
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False, path_type=Path), required=True, help="TREC-style run file.")
@click.option("--memory", type=existing_file, help="Experience memory for learned policies.")
@click.option("--dataset-tag", help="Dataset tag for scene analysis (default: the queries' directory name).")
@click.pass_context
def run(ctx, index_dir, queries, method, k, out, memory, dataset_tag) -> None:
    """Retrieve for every query with one method and write a run file."""
    cfg = _config(ctx)
    pool = load_index(index_dir)
    tag = dataset_tag or queries.resolve().parent.name
    records = sorted(load_queries(queries, dataset_tag=tag), key=lambda q: q.query_id)
    mem = _memory(memory)
    hits = {q.query_id: retrieve(method, q, pool, k, mem, cfg)[0] for q in records}
    write_run(hits, method, out)
    click.echo(f"wrote {len(hits)} queries -> {out}")


@cli.command("eval")
@click.option("--run", "run_path", type=existing_file, required=True)
@click.option("--qrels", type=existing_file, required=True)
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--queries", type=existing_file, help="Score every judged query in this file (missing results count as 0).")
def eval_cmd(run_path, qrels, k, queries) -> None:
    """Score a run file: metrics as text, then as CSV."""
    _, ranked = read_run(run_path)
    qids = [q.query_id for q in load_queries(queries)] if queries else None
    metrics, _, skipped = evaluate_run(ranked, load_qrels(qrels), k, qids)
    click.echo(metrics.format_text())
    if skipped:
        click.echo(f"skipped    {skipped} (no relevant judgments)")
    click.echo()
    click.echo(metrics.to_csv(), nl=False)


@cli.command()
@click.option("--runs", "runs", type=existing_file, multiple=True, help="Run files (repeat, or list after --runs).")
@click.argument("more_runs", nargs=-1, type=existing_file)
@click.option("--qrels", type=existing_file, required=True)
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--csv", "csv_out", type=click.Path(dir_okay=False, path_type=Path), help="Also write the table as CSV.")
def compare(runs, more_runs, qrels, k, csv_out) -> None:
    """Compare run files on one set of qrels."""
    paths = list(runs) + list(more_runs)
    if not paths:
        raise click.UsageError("give at least one run file")
    judgments = load_qrels(qrels)
    named = []
    for p in paths:
        method, ranked = read_run(p)
        named.append((method, evaluate_run(ranked, judgments, k)[0]))
    table = ComparisonTable.from_metrics(named)
    click.echo(table.format_text())
    if csv_out:
        csv_out.write_text(table.to_csv(), encoding="utf-8")


def _ablation_datasets(indexes, queries, qrels, names, bench, cfg) -> list[Dataset]:
    if bench is not None:
        if indexes or queries or qrels:
            raise click.UsageError("use either --bench or --index/--queries/--qrels, not both")
        tasks = list(read_manifest(bench / "manifest.tsv")) if (bench / "manifest.tsv").is_file() else list(TASKS)
        return [load_dataset_dir(bench / t, config=cfg) for t in tasks]
    if not indexes:
        raise click.UsageError("give --bench or at least one --index/--queries/--qrels triple")
    if not len(indexes) == len(queries) == len(qrels):
        raise click.UsageError("--index, --queries and --qrels must be given the same number of times")
    if names and len(names) != len(indexes):
        raise click.UsageError("--name must be given once per --index")
    names = names or (None,) * len(indexes)
    return [dataset_from_index(i, q, r, n) for i, q, r, n in zip(indexes, queries, qrels, names)]


@cli.command()
@click.option("--index", "indexes", type=existing_dir, multiple=True, help="Index directory (one per dataset).")
@click.option("--queries", type=existing_file, multiple=True)
@click.option("--qrels", type=existing_file, multiple=True)
@click.option("--name", "names", multiple=True, help="Dataset names (default: each queries file's directory).")
@click.option("--bench", type=existing_dir, help="Synthetic benchmark directory instead of index triples.")
@click.option("--memory", type=click.Path(dir_okay=False, path_type=Path), help="Experience memory (JSON-Lines).")
@click.option("--record", is_flag=True, help="After evaluating, append per-query experience to --memory.")
@click.option("--extended", is_flag=True, help="Evaluate all eight methods instead of the four ablation rows.")
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--csv", "csv_out", type=click.Path(dir_okay=False, path_type=Path), help="Also write the table as CSV.")
@click.pass_context
def ablation(ctx, indexes, queries, qrels, names, bench, memory, record, extended, k, csv_out) -> None:
    """Skill vs fixed strategies per dataset and on the pooled mixture."""
    cfg = _config(ctx)
    if record and memory is None:
        raise click.UsageError("--record needs --memory")
    datasets = _ablation_datasets(indexes, queries, qrels, names, bench, cfg)
    mem = load_memory(memory) if memory is not None and memory.exists() else None
    methods = METHODS if extended else ABLATION_METHODS
    table, results = ablation_results(datasets, mem, k, cfg, methods)
    click.echo(table.format_text())
    click.echo()
    click.echo(format_breakdown(results))
    skipped = results[0].skipped
    if skipped:
        click.echo(f"\nskipped {skipped} queries without relevant judgments")
    if csv_out:
        csv_out.write_text(table.to_csv(), encoding="utf-8")
    if record:
        target = ExperienceMemory.open(memory)
        before = len(target)
        collect_experience(datasets, target, k, cfg)
        click.echo(f"recorded {len(target) - before} experience records -> {memory}")


def _emit_package(package, as_json: bool) -> None:
    if as_json:
        click.echo(json.dumps(package.to_dict(), ensure_ascii=False, sort_keys=True))
    else:
        click.echo(package.format_text())


@cli.command("route")
@click.option("--index", "index_dir", type=existing_dir, required=True)
@click.option("--query", required=True)
@click.option("--history", multiple=True, help="Earlier conversation turn (repeatable).")
@click.option("--task-type", type=click.Choice([t.value for t in TaskType]))
@click.option("--domain")
@click.option("--structure", type=click.Choice([s.value for s in DocumentStructure]))
@click.option("--policy", type=click.Choice(POLICIES), default="rule", show_default=True)
@click.option("--memory", type=existing_file)
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True)
@click.option("--json", "as_json", is_flag=True, help="Print the package as JSON.")
@click.pass_context
def route_cmd(ctx, index_dir, query, history, task_type, domain, structure, policy, memory, k, as_json) -> None:
    """Route one query and print the decision with its evidence."""
    metadata = {"task_type": task_type, "domain": domain, "document_structure": structure}
    request = SkillRequest(QueryRecord("q", query), history, {k_: v for k_, v in metadata.items() if v})
    package = invoke_skill(request, load_index(index_dir), _memory(memory), policy, k, _config(ctx))
    _emit_package(package, as_json)


def _parse_request(line: str, line_no: int) -> SkillRequest:
    try:
        obj = json.loads(line)
        query = QueryRecord(str(obj.get("query_id", f"req-{line_no}")), obj["query"])
        metadata = {str(k): str(v) for k, v in (obj.get("metadata") or {}).items()}
        return SkillRequest(query, [str(h) for h in obj.get("history", [])], metadata)
    except (json.JSONDecodeError, KeyError, TypeError, ValueError, AttributeError) as exc:
        raise ExpragError(f"request line {line_no}: {exc}") from exc


@cli.command("serve-batch")
@click.option("--index", "index_dir", type=existing_dir, required=True)
@click.option(
    "--requests",
    type=click.File("r", encoding="utf-8"),
    default="-",
    help='JSON-Lines {"query_id", "query", "history", "metadata"}; "-" reads stdin.',
)
@click.option("--policy", type=click.Choice(POLICIES), default="rule", show_default=True)
@click.option("--memory", type=existing_file)
@click.option("--k", type=click.IntRange(min=1), default=10, show_default=True)
@click.pass_context
def serve_batch(ctx, index_dir, requests, policy, memory, k) -> None:
    """Answer a file of requests with one JSON package per line. Never writes experience."""
    pool = load_index(index_dir)
    mem = _memory(memory)
    cfg = _config(ctx)
    for line_no, line in enumerate(requests, start=1):
        if line.strip():
            _emit_package(invoke_skill(_parse_request(line, line_no), pool, mem, policy, k, cfg), True)


@cli.command()
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--out", type=click.Path(file_okay=False, path_type=Path), required=True)
@click.option("--queries-per-task", type=click.IntRange(min=10), default=40, show_default=True)
@click.option("--corpus-size", type=click.IntRange(min=10), default=300, show_default=True)
@click.option("--no-measure", is_flag=True, help="Skip evaluating margins for the manifest.")
def synth(seed, out, queries_per_task, corpus_size, no_measure) -> None:
    """Generate the synthetic three-task benchmark."""
    try:
        spec = BenchmarkSpec(seed=seed, queries_per_task=queries_per_task, corpus_size_per_task=corpus_size)
    except ValueError as exc:
        raise click.UsageError(str(exc)) from None
    generate_benchmark(spec, out, evaluate=not no_measure)
    for task, (strategy, margin) in read_manifest(out / "manifest.tsv").items():
        shown = "" if margin is None else f"  margin {margin:+.4f}"
        click.echo(f"{task:<11} favors {strategy}{shown}")
    click.echo(f"wrote {out}")


def main(argv: list[str] | None = None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="exprag", standalone_mode=False)
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.exceptions.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.ClickException as exc:
        exc.show()
        return EXIT_DATA
    except (ExpragError, ValueError, OSError) as exc:
        click.echo(f"error: {exc}", err=True)
        return EXIT_DATA
    return rv if isinstance(rv, int) else 0


if __name__ == "__main__":
    sys.exit(main())
