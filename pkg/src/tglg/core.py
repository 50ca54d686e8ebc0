"""Domain model: utterances, histories, clusters, instances, metric parameters, reports.

All types here are immutable values; they can be shared freely across
threads and processes. Data-bearing types (:class:`Utterance`,
:class:`InteractionHistory`) are permissive on construction so that
invalid records can be represented and then reported by
:func:`validate_history`; configuration types (:class:`TraceParams`)
validate eagerly and raise :class:`~tglg.errors.ParameterError`.

Times are real seconds (double precision). Scores live on the [0, 1]
scale internally; rendering as percentages is a presentation concern of
the CLI layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Any, Mapping

from .errors import ParameterError

TOKENS_PER_WORD = 1.3
WORDS_PER_SECOND = 2.5  # 150 words per minute


@dataclass(frozen=True)
class Utterance:
    """A timestamped text span.

    ``token_count`` may be absent in raw data; loaders fill it from a
    whitespace word count times :data:`TOKENS_PER_WORD`, rounded up.
    Per-token timestamps are not retained: no scored quantity reads them.
    """

    speaker_role: str
    start_s: float
    end_s: float
    text: str
    token_count: int | None = None
    dialogue_acts: tuple[str, ...] = ()

    @property
    def duration_s(self) -> float:
        return self.end_s - self.start_s

    def shifted(self, offset_s: float) -> "Utterance":
        """Return a copy with both timestamps translated by ``offset_s``."""
        return replace(self, start_s=self.start_s + offset_s, end_s=self.end_s + offset_s)


def utterance_sort_key(u: Utterance) -> tuple[float, float]:
    return (u.start_s, u.end_s)


def sort_utterances(utterances: list[Utterance] | tuple[Utterance, ...]) -> tuple[Utterance, ...]:
    """Canonical order: by start, ties by end, then insertion order (stable)."""
    return tuple(sorted(utterances, key=utterance_sort_key))


@dataclass(frozen=True)
class InteractionHistory:
    """One datapoint: the full ordered utterance record of a video segment."""

    id: str
    utterances: tuple[Utterance, ...]
    metadata: Mapping[str, str] = field(default_factory=dict)


@dataclass(frozen=True)
class EvaluationCluster:
    """Positions (into a parent history) of one group of target utterances.

    Members are expected to span at most ``window_s`` seconds from the
    earliest start to the latest end; extraction enforces this while
    growing a cluster, so only a lone utterance longer than the window
    can exceed it.
    """

    indices: tuple[int, ...]
    window_s: float = 5.0

    def __post_init__(self) -> None:
        if not self.indices:
            raise ParameterError("cluster must contain at least one index")
        if any(b <= a for a, b in zip(self.indices, self.indices[1:])):
            raise ParameterError("cluster indices must be strictly increasing")


@dataclass(frozen=True)
class EvaluationInstance:
    """One evaluation datapoint: context utterances plus a target cluster.

    ``context_end_s`` is the start of the first target; ``eval_end_s`` is
    the end of the last one. The frame timeline spans
    ``[timeline_start_s, eval_end_s]`` at ``frame_rate_fps``; pixel data
    never enters the system, only the bounds and rate.
    """

    context_utterances: tuple[Utterance, ...]
    target_utterances: tuple[Utterance, ...]
    context_end_s: float
    eval_end_s: float
    frame_rate_fps: float = 2.0
    timeline_start_s: float = 0.0
    instance_id: str = ""
    metadata: Mapping[str, str] = field(default_factory=dict)

    def frame_times(self) -> list[float]:
        """Frame timestamps at 1/fps spacing from the timeline start to eval end."""
        step = 1.0 / self.frame_rate_fps
        times = []
        k = 0
        while True:
            t = self.timeline_start_s + k * step
            if t > self.eval_end_s + 1e-12:
                break
            times.append(t)
            k += 1
        return times


@dataclass(frozen=True)
class GeneratedStream:
    """Model output for one instance: timestamped utterances with role "model"."""

    utterances: tuple[Utterance, ...]
    end_time_estimated: bool = False


@dataclass(frozen=True)
class TraceParams:
    """Metric parameters. Defaults reproduce the reference evaluation setup."""

    tau_time: float = 3.0
    tau_win: float = 5.0
    tau_pen: float = 1.0
    alpha_start: float = 0.4
    alpha_end: float = 0.4
    alpha: float = 0.5
    max_refine_passes: int = 10

    def __post_init__(self) -> None:
        for name in ("tau_time", "tau_win", "tau_pen"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ParameterError(f"{name} must be a positive real, got {value!r}")
        for name in ("alpha_start", "alpha_end", "alpha"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ParameterError(f"{name} must lie in [0, 1], got {value!r}")
        if self.alpha_start + self.alpha_end > 1.0:
            raise ParameterError(
                f"alpha_start + alpha_end must not exceed 1, got {self.alpha_start + self.alpha_end}"
            )
        if not (isinstance(self.max_refine_passes, int) and self.max_refine_passes >= 1):
            raise ParameterError(f"max_refine_passes must be a positive integer, got {self.max_refine_passes!r}")

    def to_record(self) -> dict[str, Any]:
        return {
            "tau_time": self.tau_time,
            "tau_win": self.tau_win,
            "tau_pen": self.tau_pen,
            "alpha_start": self.alpha_start,
            "alpha_end": self.alpha_end,
            "alpha": self.alpha,
            "max_refine_passes": self.max_refine_passes,
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "TraceParams":
        return cls(**{k: record[k] for k in cls().to_record() if k in record})


@dataclass(frozen=True)
class PairDetail:
    """Per-matched-pair components, un-scaled by F1."""

    gt_index: int
    gen_index: int
    similarity: float
    start_component: float
    end_component: float


@dataclass(frozen=True)
class TraceReport:
    """Decomposed scores for one ground-truth/generated pair of streams.

    Aggregate fields carry the F1 factor; ``pair_details`` components do
    not. ``trace`` always equals ``alpha * semantic + (1 - alpha) * timing``.
    """

    trace: float
    semantic: float
    timing: float
    start: float
    end: float
    overlap: float
    f1: float
    precision: float
    recall: float
    n_ground_truth: int
    n_generated: int
    n_matched: int
    pair_details: tuple[PairDetail, ...] = ()

    SCORE_FIELDS = ("trace", "semantic", "timing", "start", "end", "overlap", "f1")

    def to_record(self) -> dict[str, Any]:
        return {
            "trace": self.trace,
            "semantic": self.semantic,
            "timing": self.timing,
            "start": self.start,
            "end": self.end,
            "overlap": self.overlap,
            "f1": self.f1,
            "precision": self.precision,
            "recall": self.recall,
            "n_ground_truth": self.n_ground_truth,
            "n_generated": self.n_generated,
            "n_matched": self.n_matched,
            "pairs": [
                {
                    "gt_index": p.gt_index,
                    "gen_index": p.gen_index,
                    "similarity": p.similarity,
                    "start_component": p.start_component,
                    "end_component": p.end_component,
                }
                for p in self.pair_details
            ],
        }

    @classmethod
    def from_record(cls, record: Mapping[str, Any]) -> "TraceReport":
        pairs = tuple(
            PairDetail(
                gt_index=p["gt_index"],
                gen_index=p["gen_index"],
                similarity=p["similarity"],
                start_component=p["start_component"],
                end_component=p["end_component"],
            )
            for p in record.get("pairs", [])
        )
        return cls(
            trace=record["trace"],
            semantic=record["semantic"],
            timing=record["timing"],
            start=record["start"],
            end=record["end"],
            overlap=record["overlap"],
            f1=record["f1"],
            precision=record["precision"],
            recall=record["recall"],
            n_ground_truth=record["n_ground_truth"],
            n_generated=record["n_generated"],
            n_matched=record["n_matched"],
            pair_details=pairs,
        )


def validate_history(history: InteractionHistory) -> list[str]:
    """Check every type invariant; return one description per violation.

    Violations are data, not failures: the input is never mutated and
    nothing is raised. An empty list means the history is valid.
    """
    violations: list[str] = []
    for i, u in enumerate(history.utterances):
        if u.start_s < 0:
            violations.append(f"utterance {i}: start_s {u.start_s} is negative")
        if u.start_s > u.end_s:
            violations.append(f"utterance {i}: start_s {u.start_s} exceeds end_s {u.end_s}")
        if u.text and u.token_count is not None and u.token_count < 1:
            violations.append(f"utterance {i}: non-empty text with token_count {u.token_count}")
    for i in range(len(history.utterances) - 1):
        a, b = history.utterances[i], history.utterances[i + 1]
        if utterance_sort_key(a) > utterance_sort_key(b):
            violations.append(f"utterances {i} and {i + 1} out of start-time order")
    return violations


def estimate_token_count(text: str) -> int:
    """Whitespace word count scaled by tokens-per-word, rounded up (min 1)."""
    words = len(text.split())
    return max(1, math.ceil(words * TOKENS_PER_WORD))


# --- record codecs (the JSON-facing dict shape used by file formats) ---


def utterance_to_record(u: Utterance) -> dict[str, Any]:
    record: dict[str, Any] = {
        "role": u.speaker_role,
        "start": u.start_s,
        "end": u.end_s,
        "text": u.text,
    }
    if u.token_count is not None:
        record["tokens"] = u.token_count
    if u.dialogue_acts:
        record["acts"] = list(u.dialogue_acts)
    return record


def utterance_from_record(record: Mapping[str, Any], default_role: str = "unknown") -> Utterance:
    return Utterance(
        speaker_role=str(record.get("role", default_role)),
        start_s=float(record["start"]),
        end_s=float(record["end"]),
        text=str(record.get("text", "")),
        token_count=int(record["tokens"]) if record.get("tokens") is not None else None,
        dialogue_acts=tuple(record.get("acts") or ()),
    )


def history_to_record(history: InteractionHistory) -> dict[str, Any]:
    return {
        "id": history.id,
        "metadata": dict(history.metadata),
        "utterances": [utterance_to_record(u) for u in history.utterances],
    }


def history_from_record(record: Mapping[str, Any]) -> InteractionHistory:
    utterances = tuple(utterance_from_record(r) for r in record.get("utterances", []))
    return InteractionHistory(
        id=str(record["id"]),
        utterances=utterances,
        metadata={str(k): str(v) for k, v in (record.get("metadata") or {}).items()},
    )
