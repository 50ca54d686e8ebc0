"""Task mechanics around the metric: ingestion, cluster extraction, instance
construction, end-time estimation, dataset statistics, and per-category
aggregation.

File formats (all line-delimited JSON, one object per line):

* history file:   ``{"id": str, "metadata": {str: str}, "utterances":
  [{"role", "start", "end", "text", "tokens"?, "acts"?}]}``
* instance / generated-stream file: ``{"instance_id": str, "category"?:
  str, "utterances": [{"start", "end"?, "text", "tokens"?, "role"?}]}``
  — a missing ``end`` is estimated from the token count and a fixed
  speech rate.
* report file:    ``{"instance_id", "category", "params", "report"}``
  with the full TraceReport record.

Unknown keys in records are ignored, which leaves room for per-token
timestamp fields without breaking older readers.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Iterable, Mapping, Sequence

from .core import (
    TOKENS_PER_WORD,
    WORDS_PER_SECOND,
    EvaluationCluster,
    EvaluationInstance,
    GeneratedStream,
    InteractionHistory,
    TraceParams,
    TraceReport,
    Utterance,
    estimate_token_count,
    history_from_record,
    sort_utterances,
    utterance_from_record,
    validate_history,
)
from .errors import DataFormatError, ParameterError

TargetPredicate = Callable[[Utterance], bool]


def role_is(*roles: str) -> TargetPredicate:
    """Predicate selecting utterances whose speaker role is one of ``roles``."""
    allowed = frozenset(roles)
    return lambda u: u.speaker_role in allowed


@dataclass
class LoadResult:
    """Parsed histories plus warnings for records that failed validation."""

    histories: list[InteractionHistory]
    warnings: list[str] = field(default_factory=list)

    @property
    def warning_count(self) -> int:
        return len(self.warnings)


def load_histories(path: str | Path) -> LoadResult:
    """Read a history file: parse, fill token counts, sort, validate.

    Malformed JSON raises :class:`DataFormatError` with the line number.
    Records that parse but violate an invariant (e.g. ``end < start``)
    are skipped with a warning instead of aborting the whole load.
    """
    result = LoadResult(histories=[])
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            try:
                history = history_from_record(record)
            except (KeyError, TypeError, ValueError) as exc:
                result.warnings.append(f"{path}:{line_no}: malformed record skipped ({exc})")
                continue
            history = replace(
                history,
                utterances=sort_utterances([_with_token_count(u) for u in history.utterances]),
            )
            violations = validate_history(history)
            if violations:
                result.warnings.append(
                    f"{path}:{line_no}: history '{history.id}' skipped: " + "; ".join(violations)
                )
                continue
            result.histories.append(history)
    return result


def _with_token_count(u: Utterance) -> Utterance:
    if u.token_count is not None:
        return u
    return replace(u, token_count=estimate_token_count(u.text))


def estimate_end_time(start_s: float, token_count: int) -> float:
    """End time inferred from token count at 150 words/min, 1.3 tokens/word."""
    if token_count < 1:
        raise ParameterError(f"token_count must be >= 1, got {token_count!r}")
    return start_s + (token_count / TOKENS_PER_WORD) / WORDS_PER_SECOND


def extract_clusters(
    history: InteractionHistory,
    target_predicate: TargetPredicate,
    window_s: float = 5.0,
) -> list[EvaluationCluster]:
    """Greedy left-to-right grouping of target utterances.

    A cluster grows while adding the next target keeps the span
    (max end - min start) within ``window_s`` and no non-target
    utterance sits between the members. Every target utterance lands in
    exactly one cluster; a lone utterance longer than the window still
    forms its own (over-long) singleton.
    """
    if window_s <= 0:
        raise ParameterError(f"window_s must be positive, got {window_s!r}")
    clusters: list[EvaluationCluster] = []
    current: list[int] = []
    span_start = span_end = 0.0

    def close() -> None:
        nonlocal current
        if current:
            clusters.append(EvaluationCluster(indices=tuple(current), window_s=window_s))
            current = []

    for idx, u in enumerate(history.utterances):
        if not target_predicate(u):
            close()
            continue
        if current:
            new_start = min(span_start, u.start_s)
            new_end = max(span_end, u.end_s)
            if new_end - new_start <= window_s:
                current.append(idx)
                span_start, span_end = new_start, new_end
                continue
            close()
        current = [idx]
        span_start, span_end = u.start_s, u.end_s
    close()
    return clusters


def build_instance(
    history: InteractionHistory,
    cluster: EvaluationCluster,
    fps: float = 2.0,
    instance_id: str = "",
) -> EvaluationInstance:
    """Context/target split for one cluster.

    Context is every utterance strictly before the first cluster member;
    the frame timeline runs from the first utterance of the history to
    the end of the last target.
    """
    n = len(history.utterances)
    if any(i < 0 or i >= n for i in cluster.indices):
        raise ParameterError(
            f"cluster indices {cluster.indices} out of range for history of {n} utterances"
        )
    first = cluster.indices[0]
    targets = tuple(history.utterances[i] for i in cluster.indices)
    context = tuple(history.utterances[:first])
    return EvaluationInstance(
        context_utterances=context,
        target_utterances=targets,
        context_end_s=targets[0].start_s,
        eval_end_s=max(u.end_s for u in targets),
        frame_rate_fps=fps,
        timeline_start_s=history.utterances[0].start_s if history.utterances else 0.0,
        instance_id=instance_id or f"{history.id}#{first}",
        metadata=dict(history.metadata),
    )


@dataclass(frozen=True)
class DatasetStats:
    """The four dataset-table columns; ``avg_gap_s`` is None when no
    datapoint has two or more counted utterances."""

    size: int
    avg_utterances: float
    avg_tokens: float
    avg_gap_s: float | None

    def to_record(self) -> dict[str, Any]:
        return {
            "size": self.size,
            "avg_utterances": self.avg_utterances,
            "avg_tokens": self.avg_tokens,
            "avg_gap_s": self.avg_gap_s,
        }


def dataset_stats(
    histories: Sequence[InteractionHistory],
    target_predicate: TargetPredicate | None = None,
) -> DatasetStats:
    """Datapoint count, mean utterances per datapoint, mean tokens per
    utterance, mean gap between successive utterance starts.

    When ``target_predicate`` is given, only matching utterances are
    counted. Gaps are successive start differences within a datapoint,
    pooled over the dataset; results do not depend on file order.
    """
    counts: list[int] = []
    tokens: list[int] = []
    gaps: list[float] = []
    for history in histories:
        selected = [
            u for u in history.utterances if target_predicate is None or target_predicate(u)
        ]
        counts.append(len(selected))
        tokens.extend(u.token_count for u in selected if u.token_count is not None)
        gaps.extend(
            b.start_s - a.start_s for a, b in zip(selected, selected[1:])
        )
    size = len(histories)
    return DatasetStats(
        size=size,
        avg_utterances=(sum(counts) / size) if size else 0.0,
        avg_tokens=(sum(tokens) / len(tokens)) if tokens else 0.0,
        avg_gap_s=(math.fsum(gaps) / len(gaps)) if gaps else None,
    )


# --- category maps and aggregation ---


@dataclass(frozen=True)
class CategoryMap:
    """Grouping of raw category keys into report rows."""

    name: str
    groups: Mapping[str, tuple[str, ...]]

    def __post_init__(self) -> None:
        seen: set[str] = set()
        for keys in self.groups.values():
            for key in keys:
                if key in seen:
                    raise ParameterError(f"raw category key '{key}' appears in two groups")
                seen.add(key)

    def group_of(self, raw_key: str) -> str | None:
        for group, keys in self.groups.items():
            if raw_key in keys:
                return group
        return None


SOCCERNET_CATEGORIES = CategoryMap(
    name="soccernet",
    groups={
        "Attempts": ("Shots on target", "Shots off target", "Clearance"),
        "Discipline": ("Yellow card", "Red card", "Yellow->red card"),
        "Goal/Penalty": ("Goal", "Penalty"),
        "Infractions": ("Offside", "Foul"),
        "Restarts": (
            "Kick-off",
            "Ball out of play",
            "Throw-in",
            "Corner",
            "Direct free-kick",
            "Indirect free-kick",
        ),
        "Substitution": ("Substitution",),
    },
)

HOLOASSIST_CATEGORIES = CategoryMap(
    name="holoassist",
    groups={
        "Assemble Furniture": (
            "assemble nightstand",
            "assemble stool",
            "assemble tray table",
            "assemble utility cart",
        ),
        "Disassemble Furniture": (
            "disassemble nightstand",
            "disassemble stool",
            "disassemble tray table",
            "disassemble utility cart",
        ),
        "Make Coffee": (
            "make coffee with nespresso machine",
            "make coffee with espresso machine",
        ),
        "Repair Machinery": ("change belt", "change circuit breaker", "fix motorcycle"),
        "Setup Electronics": (
            "setup camera",
            "setup switch",
            "setup big printer",
            "setup small printer",
            "setup gopro",
            "assemble laser scanner",
            "assemble computer",
        ),
    },
)

BUILTIN_CATEGORY_MAPS = {
    "soccernet": SOCCERNET_CATEGORIES,
    "holoassist": HOLOASSIST_CATEGORIES,
}

UNCATEGORIZED = "uncategorized"

_MEAN_FIELDS = ("trace", "semantic", "timing", "start", "end", "overlap", "f1")


@dataclass(frozen=True)
class AggregateRow:
    """Per-group means (and optional model-minus-baseline deltas)."""

    group: str
    count: int
    means: Mapping[str, float]
    deltas: Mapping[str, float] | None = None


def category_map_from_file(path: str | Path) -> CategoryMap:
    """Read ``{"name": str, "groups": {group: [raw keys]}}`` from JSON."""
    with open(path, encoding="utf-8") as handle:
        record = json.load(handle)
    try:
        return CategoryMap(
            name=str(record.get("name", Path(path).stem)),
            groups={str(g): tuple(map(str, keys)) for g, keys in record["groups"].items()},
        )
    except (KeyError, TypeError) as exc:
        raise DataFormatError(f"{path}: invalid category map ({exc})") from exc


def _group_means(
    reports: Iterable[tuple[Mapping[str, str], TraceReport]],
    category_map: CategoryMap,
    warnings: list[str] | None = None,
) -> dict[str, list[TraceReport]]:
    grouped: dict[str, list[TraceReport]] = {}
    for metadata, report in reports:
        raw_key = metadata.get("category", "")
        group = category_map.group_of(raw_key)
        if group is None:
            group = UNCATEGORIZED
            if warnings is not None:
                warnings.append(f"unknown category key '{raw_key}' routed to {UNCATEGORIZED}")
        grouped.setdefault(group, []).append(report)
    return grouped


def _mean_fields(reports: Sequence[TraceReport]) -> dict[str, float]:
    return {
        name: math.fsum(getattr(r, name) for r in reports) / len(reports)
        for name in _MEAN_FIELDS
    }


def aggregate(
    reports: Sequence[tuple[Mapping[str, str], TraceReport]],
    category_map: CategoryMap,
    baseline: Sequence[tuple[Mapping[str, str], TraceReport]] | None = None,
    warnings: list[str] | None = None,
) -> list[AggregateRow]:
    """Group instance reports by category and mean every score field.

    With a baseline report set, each row also carries the trace,
    semantic, and timing deltas (model minus baseline) for groups
    present in both sets. Instances with unknown raw keys are kept under
    an "uncategorized" group so totals always reconcile with the input.
    """
    grouped = _group_means(reports, category_map, warnings)
    baseline_grouped = (
        _group_means(baseline, category_map, warnings) if baseline is not None else {}
    )
    order = list(category_map.groups) + [UNCATEGORIZED]
    rows: list[AggregateRow] = []
    for group in order:
        members = grouped.get(group)
        if not members:
            continue
        means = _mean_fields(members)
        deltas = None
        if baseline is not None and group in baseline_grouped:
            base = _mean_fields(baseline_grouped[group])
            deltas = {
                "trace": means["trace"] - base["trace"],
                "semantic": means["semantic"] - base["semantic"],
                "timing": means["timing"] - base["timing"],
            }
        rows.append(AggregateRow(group=group, count=len(members), means=means, deltas=deltas))
    return rows


def aggregate_csv_text(rows: Sequence[AggregateRow]) -> str:
    """CSV with columns group,count,trace,...,f1[,d_trace,d_semantic,d_timing]."""
    with_deltas = any(row.deltas is not None for row in rows)
    header = ["group", "count", *_MEAN_FIELDS]
    if with_deltas:
        header += ["d_trace", "d_semantic", "d_timing"]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        values: list[Any] = [row.group, row.count]
        values += [repr(float(row.means[name])) for name in _MEAN_FIELDS]
        if with_deltas:
            if row.deltas is None:
                values += ["", "", ""]
            else:
                values += [repr(float(row.deltas[k])) for k in ("trace", "semantic", "timing")]
        writer.writerow(values)
    return buffer.getvalue()


def write_aggregate_csv(rows: Sequence[AggregateRow], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(aggregate_csv_text(rows))


# --- instance-level stream files (ground truth and generated) ---


@dataclass(frozen=True)
class InstanceStream:
    """One instance's utterances as read from a stream file."""

    instance_id: str
    stream: GeneratedStream
    category: str = ""


def load_instance_streams(
    path: str | Path,
    default_role: str = "model",
    allow_missing_end: bool = True,
) -> list[InstanceStream]:
    """Read an instance/generated-stream file.

    A record without an ``end`` gets one estimated from its token count
    (word count when tokens are absent too); with
    ``allow_missing_end=False`` such a record is a format error, which
    is the right strictness for ground-truth files.
    """
    out: list[InstanceStream] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise DataFormatError(f"{path}:{line_no}: invalid JSON: {exc}") from exc
            try:
                out.append(
                    _instance_from_record(record, default_role, allow_missing_end)
                )
            except (KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"{path}:{line_no}: {exc}") from exc
    return out


def _instance_from_record(
    record: Mapping[str, Any], default_role: str, allow_missing_end: bool
) -> InstanceStream:
    instance_id = str(record["instance_id"])
    utterances: list[Utterance] = []
    estimated = False
    for u_record in record.get("utterances", []):
        if u_record.get("end") is None:
            if not allow_missing_end:
                raise DataFormatError(
                    f"instance '{instance_id}': utterance at {u_record.get('start')} has no end time"
                )
            start = float(u_record["start"])
            tokens = u_record.get("tokens")
            if tokens is None:
                tokens = estimate_token_count(str(u_record.get("text", "")))
            u_record = dict(u_record)
            u_record["tokens"] = tokens
            u_record["end"] = estimate_end_time(start, int(tokens))
            estimated = True
        utterances.append(utterance_from_record(u_record, default_role=default_role))
    return InstanceStream(
        instance_id=instance_id,
        stream=GeneratedStream(
            utterances=sort_utterances(utterances), end_time_estimated=estimated
        ),
        category=str(record.get("category", "")),
    )


def instance_to_record(entry: InstanceStream) -> dict[str, Any]:
    record: dict[str, Any] = {"instance_id": entry.instance_id}
    if entry.category:
        record["category"] = entry.category
    record["utterances"] = [
        {
            "start": u.start_s,
            "end": u.end_s,
            "text": u.text,
            **({"tokens": u.token_count} if u.token_count is not None else {}),
        }
        for u in entry.stream.utterances
    ]
    return record


def instance_from_evaluation(
    instance: EvaluationInstance, category_key: str = ""
) -> InstanceStream:
    """Ground-truth stream record for one evaluation instance (its targets)."""
    return InstanceStream(
        instance_id=instance.instance_id,
        stream=GeneratedStream(utterances=sort_utterances(list(instance.target_utterances))),
        category=category_key or instance.metadata.get("category", ""),
    )


# --- report files ---


@dataclass(frozen=True)
class InstanceReport:
    instance_id: str
    category: str
    params: TraceParams
    report: TraceReport


def report_to_record(entry: InstanceReport) -> dict[str, Any]:
    return {
        "instance_id": entry.instance_id,
        "category": entry.category,
        "params": entry.params.to_record(),
        "report": entry.report.to_record(),
    }


def report_from_record(record: Mapping[str, Any]) -> InstanceReport:
    return InstanceReport(
        instance_id=str(record["instance_id"]),
        category=str(record.get("category", "")),
        params=TraceParams.from_record(record.get("params", {})),
        report=TraceReport.from_record(record["report"]),
    )


def write_jsonl(records: Iterable[Mapping[str, Any]], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as handle:
        for record in records:
            handle.write(json.dumps(record) + "\n")


def load_reports(path: str | Path) -> list[InstanceReport]:
    out: list[InstanceReport] = []
    with open(path, encoding="utf-8") as handle:
        for line_no, line in enumerate(handle, start=1):
            if not line.strip():
                continue
            try:
                out.append(report_from_record(json.loads(line)))
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DataFormatError(f"{path}:{line_no}: invalid report record ({exc})") from exc
    return out
