"""Evaluation toolkit for timestamped language generation against
streaming-video-aligned ground truth: the TRACE metric, the TGLG task
harness, and a simulator contrasting time-synchronized interleaved
decoding with turn-based decoding."""

from .align import (
    CostMatrix,
    MatchSet,
    SimilarityMatrix,
    align,
    build_cost_matrix,
    build_similarity_matrix,
    prune_matching,
    refine_matching,
    solve_assignment,
)
from .core import (
    EvaluationCluster,
    EvaluationInstance,
    GeneratedStream,
    InteractionHistory,
    PairDetail,
    TraceParams,
    TraceReport,
    Utterance,
    validate_history,
)
from .embed import CachedEmbedder, MockEmbedder, RemoteEmbedder, select_embedder
from .harness import (
    HOLOASSIST_CATEGORIES,
    SOCCERNET_CATEGORIES,
    CategoryMap,
    aggregate,
    build_instance,
    dataset_stats,
    estimate_end_time,
    extract_clusters,
    load_histories,
    role_is,
)
from .score import (
    boundary_scores,
    evaluate_pair,
    generation_f1,
    overlap_score,
    semantic_score,
    timing_score,
    trace_score,
)
from .sim import (
    FrameEvent,
    PolicyDecision,
    ScriptedPolicy,
    SimConfig,
    SimTimeline,
    TriggerRule,
    ReviseRule,
    run_tsi,
    run_turn_based,
    scripted_policy,
)

__version__ = "0.1.0"

__all__ = [
    "CostMatrix",
    "MatchSet",
    "SimilarityMatrix",
    "align",
    "build_cost_matrix",
    "build_similarity_matrix",
    "prune_matching",
    "refine_matching",
    "solve_assignment",
    "EvaluationCluster",
    "EvaluationInstance",
    "GeneratedStream",
    "InteractionHistory",
    "PairDetail",
    "TraceParams",
    "TraceReport",
    "Utterance",
    "validate_history",
    "CachedEmbedder",
    "MockEmbedder",
    "RemoteEmbedder",
    "select_embedder",
    "HOLOASSIST_CATEGORIES",
    "SOCCERNET_CATEGORIES",
    "CategoryMap",
    "aggregate",
    "build_instance",
    "dataset_stats",
    "estimate_end_time",
    "extract_clusters",
    "load_histories",
    "role_is",
    "boundary_scores",
    "evaluate_pair",
    "generation_f1",
    "overlap_score",
    "semantic_score",
    "timing_score",
    "trace_score",
    "FrameEvent",
    "PolicyDecision",
    "ScriptedPolicy",
    "SimConfig",
    "SimTimeline",
    "TriggerRule",
    "ReviseRule",
    "run_tsi",
    "run_turn_based",
    "scripted_policy",
]
