from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from tglg.core import (
    EvaluationCluster,
    InteractionHistory,
    TraceParams,
    TraceReport,
    Utterance,
)
from tglg.errors import DataFormatError, ParameterError
from tglg.harness import (
    BUILTIN_CATEGORY_MAPS,
    HOLOASSIST_CATEGORIES,
    SOCCERNET_CATEGORIES,
    UNCATEGORIZED,
    CategoryMap,
    aggregate,
    aggregate_csv_text,
    build_instance,
    dataset_stats,
    estimate_end_time,
    extract_clusters,
    load_histories,
    load_instance_streams,
    role_is,
)


def u(start, end, role="assistant", text="go on", tokens=3):
    return Utterance(role, start, end, text, token_count=tokens)


def history(*utterances, hid="h", metadata=None):
    return InteractionHistory(id=hid, utterances=tuple(utterances), metadata=metadata or {})


# --- loading ---


def test_load_two_well_formed_histories(fixtures_dir):
    result = load_histories(fixtures_dir / "histories_sample.jsonl")
    assert [h.id for h in result.histories] == ["h1", "h2"]
    assert result.warning_count == 1  # h3 has end < start


def test_load_empty_file(tmp_path):
    path = tmp_path / "empty.jsonl"
    path.write_text("")
    result = load_histories(path)
    assert result.histories == []
    assert result.warning_count == 0


def test_load_invalid_record_skipped_with_warning(tmp_path):
    path = tmp_path / "h.jsonl"
    records = [
        {"id": "good", "metadata": {}, "utterances": [
            {"role": "a", "start": 0.0, "end": 1.0, "text": "hi", "tokens": 2}]},
        {"id": "bad", "metadata": {}, "utterances": [
            {"role": "a", "start": 5.0, "end": 4.0, "text": "oops", "tokens": 2}]},
    ]
    path.write_text("\n".join(json.dumps(r) for r in records) + "\n")
    result = load_histories(path)
    assert [h.id for h in result.histories] == ["good"]
    assert result.warning_count == 1
    assert "bad" in result.warnings[0]


def test_load_malformed_json_raises_with_line_number(tmp_path):
    path = tmp_path / "broken.jsonl"
    path.write_text('{"id": "ok", "utterances": []}\n{not json\n')
    with pytest.raises(DataFormatError, match=":2:"):
        load_histories(path)


def test_load_fills_missing_token_counts(tmp_path):
    path = tmp_path / "h.jsonl"
    record = {"id": "h", "metadata": {}, "utterances": [
        {"role": "a", "start": 0.0, "end": 1.0, "text": "one two three"}]}
    path.write_text(json.dumps(record) + "\n")
    result = load_histories(path)
    assert result.histories[0].utterances[0].token_count == 4  # ceil(3 * 1.3)


def test_load_sorts_utterances(tmp_path):
    path = tmp_path / "h.jsonl"
    record = {"id": "h", "metadata": {}, "utterances": [
        {"role": "a", "start": 2.0, "end": 3.0, "text": "later", "tokens": 1},
        {"role": "a", "start": 0.0, "end": 1.0, "text": "earlier", "tokens": 1}]}
    path.write_text(json.dumps(record) + "\n")
    result = load_histories(path)
    assert [x.start_s for x in result.histories[0].utterances] == [0.0, 2.0]


# --- end-time estimation ---


def test_estimate_end_thirteen_tokens_is_four_seconds():
    assert estimate_end_time(10.0, 13) == pytest.approx(14.0, abs=1e-12)


def test_estimate_end_single_token():
    assert estimate_end_time(0.0, 1) == pytest.approx(1 / 1.3 / 2.5, abs=1e-12)
    assert estimate_end_time(0.0, 1) == pytest.approx(0.3077, abs=1e-4)


def test_estimate_end_monotone_in_tokens():
    ends = [estimate_end_time(5.0, k) for k in range(1, 20)]
    assert all(b > a for a, b in zip(ends, ends[1:]))


def test_estimate_end_rejects_zero_tokens():
    with pytest.raises(ParameterError):
        estimate_end_time(0.0, 0)


# --- cluster extraction ---

instructor = role_is("assistant")


def test_cluster_window_triple():
    h = history(
        u(33.2, 43.3, text="now remove the indicated component"),
        u(45.3, 46.6, role="user", text="oh this thing"),
        u(46.6, 47.4, text="to the right"),
        u(47.9, 49.2, text="the small cube"),
        u(49.3, 49.8, text="yes"),
    )
    clusters = extract_clusters(h, instructor, window_s=5.0)
    assert [c.indices for c in clusters] == [(0,), (2, 3, 4)]
    # the final triple spans 49.8 - 46.6 = 3.2 seconds
    members = [h.utterances[i] for i in clusters[1].indices]
    assert max(x.end_s for x in members) - min(x.start_s for x in members) == pytest.approx(3.2)


def test_cluster_far_apart_targets_split():
    h = history(u(0.0, 1.0), u(10.0, 11.0))
    clusters = extract_clusters(h, instructor, window_s=5.0)
    assert [c.indices for c in clusters] == [(0,), (1,)]


def test_cluster_intervening_non_target_breaks_run():
    h = history(u(0.0, 1.0), u(1.5, 2.0, role="user"), u(2.5, 3.0))
    clusters = extract_clusters(h, instructor, window_s=5.0)
    assert [c.indices for c in clusters] == [(0,), (2,)]


def test_cluster_overlong_singleton_still_emitted():
    h = history(u(0.0, 12.0))
    clusters = extract_clusters(h, instructor, window_s=5.0)
    assert [c.indices for c in clusters] == [(0,)]


@st.composite
def target_histories(draw):
    n = draw(st.integers(1, 12))
    t = 0.0
    utterances = []
    for _ in range(n):
        t += draw(st.integers(1, 40)) * 0.25
        length = draw(st.integers(0, 20)) * 0.25  # duration <= window
        role = draw(st.sampled_from(["assistant", "user"]))
        utterances.append(u(t, t + length, role=role))
    return history(*utterances)


@given(target_histories())
@settings(max_examples=200, deadline=None)
def test_cluster_partition_and_window_properties(h):
    clusters = extract_clusters(h, instructor, window_s=5.0)
    covered = [i for c in clusters for i in c.indices]
    targets = [i for i, x in enumerate(h.utterances) if instructor(x)]
    assert covered == targets  # partition: each target in exactly one cluster, in order
    for c in clusters:
        members = [h.utterances[i] for i in c.indices]
        if len(members) > 1:
            span = max(x.end_s for x in members) - min(x.start_s for x in members)
            assert span <= 5.0 + 1e-12


# --- instance construction ---


def test_instance_from_reference_example():
    h = history(
        u(33.2, 43.3),
        u(45.3, 46.6, role="user"),
        u(46.6, 47.4),
        u(47.9, 49.2),
        u(49.3, 49.8),
        hid="holo1",
    )
    cluster = EvaluationCluster(indices=(2, 3, 4))
    instance = build_instance(h, cluster, fps=2.0)
    assert len(instance.context_utterances) == 2
    assert len(instance.target_utterances) == 3
    assert instance.context_end_s == pytest.approx(46.6)
    assert instance.eval_end_s == pytest.approx(49.8)
    assert all(x.start_s < instance.context_end_s for x in instance.context_utterances)


def test_instance_cluster_at_zero_has_empty_context():
    h = history(u(1.0, 2.0), u(2.5, 3.0))
    instance = build_instance(h, EvaluationCluster(indices=(0, 1)))
    assert instance.context_utterances == ()


def test_instance_frame_spacing():
    h = history(u(0.0, 1.0), u(1.5, 2.0))
    instance = build_instance(h, EvaluationCluster(indices=(1,)), fps=2.0)
    times = instance.frame_times()
    assert times[0] == 0.0
    assert all(b - a == pytest.approx(0.5) for a, b in zip(times, times[1:]))
    assert times[-1] <= instance.eval_end_s


def test_instance_out_of_range_cluster():
    h = history(u(0.0, 1.0))
    with pytest.raises(ParameterError):
        build_instance(h, EvaluationCluster(indices=(5,)))


# --- dataset statistics ---


def test_stats_gap_hand_computed():
    h = history(u(0.0, 0.5), u(2.0, 2.5), u(5.0, 5.5))
    stats = dataset_stats([h])
    assert stats.avg_gap_s == pytest.approx(2.5)


def test_stats_single_utterance_gap_absent():
    stats = dataset_stats([history(u(0.0, 1.0))])
    assert stats.avg_gap_s is None


def test_stats_token_average():
    h = history(u(0.0, 1.0, tokens=10), u(2.0, 3.0, tokens=12))
    stats = dataset_stats([h])
    assert stats.avg_tokens == pytest.approx(11.0)


def test_stats_counts_and_order_insensitivity():
    h1 = history(u(0.0, 1.0), u(2.0, 3.0), hid="a")
    h2 = history(u(1.0, 2.0), hid="b")
    forward = dataset_stats([h1, h2])
    backward = dataset_stats([h2, h1])
    assert forward == backward
    assert forward.size == 2
    assert forward.avg_utterances == pytest.approx(1.5)


def test_stats_with_predicate_filters():
    h = history(u(0.0, 1.0, role="assistant"), u(2.0, 3.0, role="user"))
    stats = dataset_stats([h], role_is("assistant"))
    assert stats.avg_utterances == 1.0


# --- category maps and aggregation ---


def test_builtin_maps_cover_reference_groups():
    assert set(SOCCERNET_CATEGORIES.groups) == {
        "Attempts", "Discipline", "Goal/Penalty", "Infractions", "Restarts", "Substitution",
    }
    assert SOCCERNET_CATEGORIES.group_of("Yellow->red card") == "Discipline"
    assert SOCCERNET_CATEGORIES.group_of("Ball out of play") == "Restarts"
    assert set(HOLOASSIST_CATEGORIES.groups) == {
        "Assemble Furniture", "Disassemble Furniture", "Make Coffee",
        "Repair Machinery", "Setup Electronics",
    }
    assert HOLOASSIST_CATEGORIES.group_of("make coffee with nespresso machine") == "Make Coffee"
    assert HOLOASSIST_CATEGORIES.group_of("assemble laser scanner") == "Setup Electronics"
    assert set(BUILTIN_CATEGORY_MAPS) == {"soccernet", "holoassist"}


def test_category_map_rejects_duplicate_raw_keys():
    with pytest.raises(ParameterError):
        CategoryMap(name="x", groups={"a": ("k",), "b": ("k",)})


def _report(**overrides):
    base = dict(
        trace=0.5, semantic=0.5, timing=0.5, start=0.5, end=0.5, overlap=0.5,
        f1=0.5, precision=0.5, recall=0.5,
        n_ground_truth=1, n_generated=1, n_matched=1,
    )
    base.update(overrides)
    return TraceReport(**base)


def test_aggregate_group_mean():
    reports = [
        ({"category": "Corner"}, _report(trace=0.2)),
        ({"category": "Throw-in"}, _report(trace=0.4)),
    ]
    rows = aggregate(reports, SOCCERNET_CATEGORIES)
    assert len(rows) == 1
    assert rows[0].group == "Restarts"
    assert rows[0].count == 2
    assert rows[0].means["trace"] == pytest.approx(0.3)


def test_aggregate_with_baseline_deltas():
    reports = [({"category": "Corner"}, _report(trace=0.30, semantic=0.4, timing=0.2))]
    baseline = [({"category": "Throw-in"}, _report(trace=0.16, semantic=0.3, timing=0.1))]
    rows = aggregate(reports, SOCCERNET_CATEGORIES, baseline=baseline)
    assert rows[0].deltas is not None
    assert rows[0].deltas["trace"] == pytest.approx(0.14)
    assert rows[0].deltas["semantic"] == pytest.approx(0.1)
    assert rows[0].deltas["timing"] == pytest.approx(0.1)


def test_aggregate_unknown_key_routed_with_warning():
    warnings = []
    rows = aggregate(
        [({"category": "mystery"}, _report())], SOCCERNET_CATEGORIES, warnings=warnings
    )
    assert rows[0].group == UNCATEGORIZED
    assert warnings and "mystery" in warnings[0]


def test_aggregate_counts_reconcile_with_input():
    reports = [
        ({"category": "Goal"}, _report()),
        ({"category": "???"}, _report()),
        ({"category": "Corner"}, _report()),
    ]
    rows = aggregate(reports, SOCCERNET_CATEGORIES)
    assert sum(row.count for row in rows) == len(reports)


def test_aggregate_empty_group_omitted():
    rows = aggregate([({"category": "Goal"}, _report())], SOCCERNET_CATEGORIES)
    assert [row.group for row in rows] == ["Goal/Penalty"]


def test_aggregate_csv_shape():
    rows = aggregate(
        [({"category": "Goal"}, _report(trace=0.25))],
        SOCCERNET_CATEGORIES,
        baseline=[({"category": "Goal"}, _report(trace=0.20))],
    )
    text = aggregate_csv_text(rows)
    lines = text.strip().split("\n")
    assert lines[0] == "group,count,trace,semantic,timing,start,end,overlap,f1,d_trace,d_semantic,d_timing"
    cells = lines[1].split(",")
    assert cells[0] == "Goal/Penalty"
    assert cells[1] == "1"
    assert float(cells[2]) == pytest.approx(0.25)
    assert float(cells[-3]) == pytest.approx(0.05)


# --- instance stream files ---


def test_instance_stream_missing_end_estimated(tmp_path):
    path = tmp_path / "gen.jsonl"
    record = {"instance_id": "i1", "utterances": [
        {"start": 10.0, "text": "one two three words here", "tokens": 13}]}
    path.write_text(json.dumps(record) + "\n")
    entries = load_instance_streams(path)
    assert entries[0].stream.end_time_estimated
    assert entries[0].stream.utterances[0].end_s == pytest.approx(14.0)


def test_instance_stream_missing_end_rejected_for_ground_truth(tmp_path):
    path = tmp_path / "gt.jsonl"
    record = {"instance_id": "i1", "utterances": [{"start": 10.0, "text": "x"}]}
    path.write_text(json.dumps(record) + "\n")
    with pytest.raises(DataFormatError, match="no end time"):
        load_instance_streams(path, allow_missing_end=False)


def test_instance_stream_missing_end_and_tokens_uses_word_count(tmp_path):
    path = tmp_path / "gen.jsonl"
    record = {"instance_id": "i1", "utterances": [{"start": 0.0, "text": "three small words"}]}
    path.write_text(json.dumps(record) + "\n")
    entries = load_instance_streams(path)
    # ceil(3 * 1.3) = 4 tokens -> 4 / 1.3 / 2.5 seconds
    assert entries[0].stream.utterances[0].end_s == pytest.approx(4 / 1.3 / 2.5)
