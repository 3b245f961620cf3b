"""Scene-aware retrieval routing with an experience memory.

A request is analyzed into scene features, routed to one strategy from a
pool (BM25, rewrite+BM25, dense, hybrid RRF), executed, and packaged as
evidence. An evaluation harness compares fixed strategies against the
routed skill.
"""

__version__ = "0.1.0"

from .config import Config, default_config, load_config
from .corpus import Document, QueryRecord, RelevanceJudgments, load_corpus, load_qrels, load_queries
from .errors import DataError, DuplicateIdError, ExpragError, MalformedRecordError, RetrievalError
from .fusion import fuse_rrf
from .harness import (
    ComparisonTable,
    Dataset,
    RunResult,
    compare_methods,
    evaluate_method,
    load_dataset,
    load_dataset_dir,
    run_ablation,
)
from .memory import ExperienceMemory, ExperienceRecord, load_memory, make_record, nearest_records, save_memory
from .metrics import MetricSet, NoRelevantDocuments, mrr_at_k, ndcg_at_k, recall_at_k
from .pool import RetrieverPool, build_pool, execute_strategy, load_index, save_index
from .ranking import RankedHit, StrategyId
from .router import RoutingDecision, RoutingPolicy, route, route_adaptive_style, route_knn, route_regress, route_rule
from .scene import SceneFeatures, SkillRequest, analyze_scene, encode_features, estimate_complexity
from .skill import ExperienceRagSkill, RetrievalPackage, invoke_skill, package_result, record_feedback
from .synth import BenchmarkSpec, generate_benchmark

__all__ = [
    "BenchmarkSpec",
    "ComparisonTable",
    "Config",
    "DataError",
    "Dataset",
    "Document",
    "DuplicateIdError",
    "ExperienceMemory",
    "ExperienceRagSkill",
    "ExperienceRecord",
    "ExpragError",
    "MalformedRecordError",
    "MetricSet",
    "NoRelevantDocuments",
    "QueryRecord",
    "RankedHit",
    "RelevanceJudgments",
    "RetrievalError",
    "RetrievalPackage",
    "RetrieverPool",
    "RoutingDecision",
    "RoutingPolicy",
    "RunResult",
    "SceneFeatures",
    "SkillRequest",
    "StrategyId",
    "analyze_scene",
    "build_pool",
    "compare_methods",
    "default_config",
    "encode_features",
    "estimate_complexity",
    "evaluate_method",
    "execute_strategy",
    "fuse_rrf",
    "generate_benchmark",
    "invoke_skill",
    "load_config",
    "load_corpus",
    "load_dataset",
    "load_dataset_dir",
    "load_index",
    "load_memory",
    "load_qrels",
    "load_queries",
    "make_record",
    "mrr_at_k",
    "ndcg_at_k",
    "nearest_records",
    "package_result",
    "recall_at_k",
    "record_feedback",
    "route",
    "route_adaptive_style",
    "route_knn",
    "route_regress",
    "route_rule",
    "run_ablation",
    "save_index",
    "save_memory",
]
