"""Temporal alignment of generated against ground-truth utterances.

The pipeline produces the matched pair set B in four stages:

1. a cost matrix ``A[i, j] = -exp(-|s_i - s_hat_j| / tau_time)`` over
   start times,
2. an optimal rectangular linear assignment on A (size ``min(N, M)``),
3. local refinement that greedily swaps the generated side of two
   matches when that raises total text similarity and all four
   utterances start within ``tau_win`` of one another,
4. pruning of every pair whose start times differ by more than
   ``tau_win`` (boundary inclusive: a pair at exactly ``tau_win`` is kept).

Everything is a pure function of its inputs; alignments can run
concurrently without shared state.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .core import TraceParams, Utterance
from .embed import Embedder
from .errors import ParameterError


@dataclass(frozen=True)
class CostMatrix:
    """Assignment costs; every entry lies in [-1, 0)."""

    values: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class SimilarityMatrix:
    """Pairwise text similarities rescaled to [0, 1]."""

    values: np.ndarray

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    @property
    def n_cols(self) -> int:
        return self.values.shape[1]


@dataclass(frozen=True)
class MatchSet:
    """One-to-one pairs (gt_index, gen_index), sorted by gt index."""

    pairs: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        gt_side = [i for i, _ in self.pairs]
        gen_side = [j for _, j in self.pairs]
        if len(set(gt_side)) != len(gt_side) or len(set(gen_side)) != len(gen_side):
            raise ParameterError("match set must be one-to-one on both sides")
        object.__setattr__(self, "pairs", tuple(sorted(self.pairs)))

    def __len__(self) -> int:
        return len(self.pairs)


def build_cost_matrix(
    gt_starts: Sequence[float], gen_starts: Sequence[float], tau_time: float
) -> CostMatrix:
    """Start-time proximity costs: closer starts cost less (more negative).

    The matrix depends only on start-time differences, so translating
    all timestamps by a constant leaves it unchanged.
    """
    if tau_time <= 0:
        raise ParameterError(f"tau_time must be positive, got {tau_time!r}")
    gt = np.asarray(gt_starts, dtype=np.float64).reshape(-1, 1)
    gen = np.asarray(gen_starts, dtype=np.float64).reshape(1, -1)
    return CostMatrix(-np.exp(-np.abs(gt - gen) / tau_time))


def solve_assignment(cost: CostMatrix) -> MatchSet:
    """Minimum-total-cost one-to-one matching of size ``min(N, M)``.

    Solved exactly (shortest-augmenting-path); the result is
    deterministic for a given matrix and returned sorted by gt index.
    """
    values = cost.values
    if values.size and not np.all(np.isfinite(values)):
        raise ParameterError("cost matrix entries must be finite")
    if values.shape[0] == 0 or values.shape[1] == 0:
        return MatchSet(())
    rows, cols = linear_sum_assignment(values)
    return MatchSet(tuple(zip(rows.tolist(), cols.tolist())))


def build_similarity_matrix(
    gt_texts: Sequence[str], gen_texts: Sequence[str], embedder: Embedder
) -> SimilarityMatrix:
    """``(1 + cos(emb(gt_i), emb(gen_j))) / 2`` for every pair, clamped to [0, 1].

    Both text lists are embedded in one batched provider call. Pairs
    whose embedding vectors are bit-identical score exactly 1.0, so
    identical texts under a deterministic provider are never dented by
    rounding.
    """
    n, m = len(gt_texts), len(gen_texts)
    if n == 0 or m == 0:
        return SimilarityMatrix(np.zeros((n, m)))
    vectors = embedder.embed(list(gt_texts) + list(gen_texts))
    gt_vecs, gen_vecs = vectors[:n], vectors[n:]
    norms_gt = np.linalg.norm(gt_vecs, axis=1)
    norms_gen = np.linalg.norm(gen_vecs, axis=1)
    if np.any(norms_gt == 0.0) or np.any(norms_gen == 0.0):
        raise ParameterError("embedding provider returned a zero vector")
    cos = (gt_vecs @ gen_vecs.T) / np.outer(norms_gt, norms_gen)
    sim = np.clip((1.0 + cos) / 2.0, 0.0, 1.0)
    gen_keys = [v.tobytes() for v in gen_vecs]
    for i, gv in enumerate(gt_vecs):
        key = gv.tobytes()
        for j in range(m):
            if key == gen_keys[j]:
                sim[i, j] = 1.0
    return SimilarityMatrix(sim)


def _window_ok(starts: tuple[float, float, float, float], tau_win: float) -> bool:
    return max(starts) - min(starts) <= tau_win


def refine_matching(
    matches: MatchSet,
    sim: SimilarityMatrix,
    gt_starts: Sequence[float],
    gen_starts: Sequence[float],
    tau_win: float,
    max_passes: int = 10,
) -> MatchSet:
    """First-improvement hill climbing on the generated side of the matching.

    Each pass scans matches sorted by gt index; for every ordered pair of
    matches (a, b) with a < b, the generated indices are swapped as soon
    as that strictly raises ``sim[i_a, j_a] + sim[i_b, j_b]`` and all four
    start times lie within ``tau_win`` of one another. Passes repeat until
    a full pass makes no swap or ``max_passes`` is reached. Total matched
    similarity never decreases, which bounds the number of swaps.
    """
    pairs = [list(p) for p in matches.pairs]
    s = sim.values
    for _ in range(max_passes):
        swapped = False
        for a in range(len(pairs)):
            for b in range(a + 1, len(pairs)):
                i_a, j_a = pairs[a]
                i_b, j_b = pairs[b]
                starts = (
                    gt_starts[i_a],
                    gt_starts[i_b],
                    gen_starts[j_a],
                    gen_starts[j_b],
                )
                if not _window_ok(starts, tau_win):
                    continue
                if s[i_a, j_a] + s[i_b, j_b] < s[i_a, j_b] + s[i_b, j_a]:
                    pairs[a][1], pairs[b][1] = j_b, j_a
                    swapped = True
        if not swapped:
            break
    return MatchSet(tuple((i, j) for i, j in pairs))


def prune_matching(
    matches: MatchSet,
    gt_starts: Sequence[float],
    gen_starts: Sequence[float],
    tau_win: float,
) -> MatchSet:
    """Drop pairs whose start times differ by strictly more than ``tau_win``."""
    kept = tuple(
        (i, j) for i, j in matches.pairs if abs(gt_starts[i] - gen_starts[j]) <= tau_win
    )
    return MatchSet(kept)


def align(
    gt: Sequence[Utterance],
    gen: Sequence[Utterance],
    params: TraceParams,
    embedder: Embedder,
) -> tuple[MatchSet, SimilarityMatrix]:
    """Full pipeline: assign by time, refine by similarity, prune by window.

    Returns the final pair set B along with the similarity matrix so the
    scoring layer does not have to re-embed anything.
    """
    gt_starts = [u.start_s for u in gt]
    gen_starts = [u.start_s for u in gen]
    cost = build_cost_matrix(gt_starts, gen_starts, params.tau_time)
    initial = solve_assignment(cost)
    sim = build_similarity_matrix([u.text for u in gt], [u.text for u in gen], embedder)
    refined = refine_matching(
        initial, sim, gt_starts, gen_starts, params.tau_win, params.max_refine_passes
    )
    return prune_matching(refined, gt_starts, gen_starts, params.tau_win), sim
