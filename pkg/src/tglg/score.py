"""TRACE components and the composite score.

Aggregates are computed as ``f1 * (sum of per-item components / count)``
rather than ``(f1 / count) * sum``: with every component equal to 1 the
inner mean is exactly 1.0 in floating point, so identities such as
"non-overlapping output gives overlap score == F1" hold to the last bit.

Degenerate-set conventions live in :func:`degenerate_report`: exactly one
empty side scores zero everywhere; two empty sides score a perfect 1.0
(silence matching silence).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .align import MatchSet, SimilarityMatrix, align
from .core import PairDetail, TraceParams, TraceReport, Utterance
from .embed import Embedder
from .errors import ParameterError


@dataclass(frozen=True)
class OverlapProfile:
    """Per-generated-utterance overlap burden and its exp penalty component."""

    per_generated: tuple[tuple[int, float, float], ...]  # (gen index, O_j seconds, component)


def generation_f1(n_matched: int, n_gt: int, n_gen: int) -> tuple[float, float, float]:
    """Precision = |B|/|gen|, recall = |B|/|gt|, F1 their harmonic mean.

    One empty side forces all three to 0; two empty sides count as a
    perfect (1, 1, 1).
    """
    if n_matched > min(n_gt, n_gen):
        raise ParameterError(
            f"n_matched {n_matched} exceeds min(n_gt={n_gt}, n_gen={n_gen})"
        )
    if n_gt == 0 and n_gen == 0:
        return 1.0, 1.0, 1.0
    if n_gt == 0 or n_gen == 0:
        return 0.0, 0.0, 0.0
    precision = n_matched / n_gen
    recall = n_matched / n_gt
    if precision + recall == 0.0:
        return precision, recall, 0.0
    return precision, recall, 2.0 * precision * recall / (precision + recall)


def semantic_score(
    matches: MatchSet, sim: SimilarityMatrix, f1: float
) -> tuple[float, list[float]]:
    """F1-scaled mean similarity over matched pairs; empty B scores 0."""
    per_pair = [float(sim.values[i, j]) for i, j in matches.pairs]
    if not per_pair:
        return 0.0, per_pair
    return f1 * (math.fsum(per_pair) / len(per_pair)), per_pair


def boundary_scores(
    matches: MatchSet,
    gt: Sequence[Utterance],
    gen: Sequence[Utterance],
    tau_pen: float,
    f1: float,
) -> tuple[float, float, list[tuple[float, float]]]:
    """Start and end alignment over matched pairs.

    Per pair, ``exp(-|delta| / tau_pen)`` for the start and end timestamp
    deltas; aggregates are F1-scaled means. Returns the per-pair
    (start, end) components un-scaled.
    """
    if tau_pen <= 0:
        raise ParameterError(f"tau_pen must be positive, got {tau_pen!r}")
    components: list[tuple[float, float]] = []
    for i, j in matches.pairs:
        s = math.exp(-abs(gt[i].start_s - gen[j].start_s) / tau_pen)
        e = math.exp(-abs(gt[i].end_s - gen[j].end_s) / tau_pen)
        components.append((s, e))
    if not components:
        return 0.0, 0.0, components
    n = len(components)
    s_start = f1 * (math.fsum(c[0] for c in components) / n)
    s_end = f1 * (math.fsum(c[1] for c in components) / n)
    return s_start, s_end, components


def overlap_score(
    gen: Sequence[Utterance], tau_pen: float, f1: float
) -> tuple[float, OverlapProfile]:
    """Penalty for generated utterances that temporally intersect each other.

    ``O_j`` sums the positive pairwise overlap of utterance j with every
    other generated utterance; its component is ``exp(-O_j / tau_pen)``.
    The aggregate is the F1-scaled mean over all generated utterances,
    so a stream with no internal overlap scores exactly F1.
    """
    if tau_pen <= 0:
        raise ParameterError(f"tau_pen must be positive, got {tau_pen!r}")
    if not gen:
        return 0.0, OverlapProfile(())
    rows: list[tuple[int, float, float]] = []
    for j, u in enumerate(gen):
        burden = 0.0
        for k, other in enumerate(gen):
            if k == j:
                continue
            burden += max(0.0, min(u.end_s, other.end_s) - max(u.start_s, other.start_s))
        rows.append((j, burden, math.exp(-burden / tau_pen)))
    aggregate = f1 * (math.fsum(r[2] for r in rows) / len(rows))
    return aggregate, OverlapProfile(tuple(rows))


def timing_score(s_start: float, s_end: float, s_overlap: float, params: TraceParams) -> float:
    """Weighted blend of start, end, and overlap alignment."""
    w_overlap = 1.0 - params.alpha_start - params.alpha_end
    return params.alpha_start * s_start + params.alpha_end * s_end + w_overlap * s_overlap


def trace_score(s_a: float, s_t: float, alpha: float) -> float:
    """Final composite: ``alpha`` on semantics, the rest on timing."""
    if not (0.0 <= alpha <= 1.0):
        raise ParameterError(f"alpha must lie in [0, 1], got {alpha!r}")
    return alpha * s_a + (1.0 - alpha) * s_t


def degenerate_report(n_gt: int, n_gen: int) -> TraceReport:
    """Scores when at least one side is empty.

    Both sides empty is perfect silence (all ones); exactly one empty
    side is a total miss (all zeros). The reference evaluation never
    exercises the both-empty case, so the convention is isolated here.
    """
    value = 1.0 if (n_gt == 0 and n_gen == 0) else 0.0
    return TraceReport(
        trace=value,
        semantic=value,
        timing=value,
        start=value,
        end=value,
        overlap=value,
        f1=value,
        precision=value,
        recall=value,
        n_ground_truth=n_gt,
        n_generated=n_gen,
        n_matched=0,
    )


def evaluate_pair(
    gt: Sequence[Utterance],
    gen: Sequence[Utterance],
    params: TraceParams,
    embedder: Embedder,
) -> TraceReport:
    """Align the two streams and compute every component into a TraceReport.

    Deterministic given a deterministic embedder. Aggregate fields carry
    the F1 factor; ``pair_details`` components do not.
    """
    gt = list(gt)
    gen = list(gen)
    if not gt or not gen:
        return degenerate_report(len(gt), len(gen))
    matches, sim = align(gt, gen, params, embedder)
    precision, recall, f1 = generation_f1(len(matches), len(gt), len(gen))
    s_a, per_pair_sim = semantic_score(matches, sim, f1)
    s_start, s_end, per_pair_bounds = boundary_scores(matches, gt, gen, params.tau_pen, f1)
    s_overlap, _ = overlap_score(gen, params.tau_pen, f1)
    s_t = timing_score(s_start, s_end, s_overlap, params)
    details = tuple(
        PairDetail(
            gt_index=i,
            gen_index=j,
            similarity=per_pair_sim[k],
            start_component=per_pair_bounds[k][0],
            end_component=per_pair_bounds[k][1],
        )
        for k, (i, j) in enumerate(matches.pairs)
    )
    return TraceReport(
        trace=trace_score(s_a, s_t, params.alpha),
        semantic=s_a,
        timing=s_t,
        start=s_start,
        end=s_end,
        overlap=s_overlap,
        f1=f1,
        precision=precision,
        recall=recall,
        n_ground_truth=len(gt),
        n_generated=len(gen),
        n_matched=len(matches),
        pair_details=details,
    )
