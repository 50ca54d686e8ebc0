"""End-to-end dataset mechanics: histories -> clusters -> instances ->
reports -> per-category table.

Builds a tiny two-video dataset in memory, extracts evaluation clusters
from the instructor turns, scores a fake model per instance, and
aggregates the reports into the per-category comparison shape.
"""

from tglg import (
    HOLOASSIST_CATEGORIES,
    InteractionHistory,
    MockEmbedder,
    TraceParams,
    Utterance,
    aggregate,
    build_instance,
    dataset_stats,
    estimate_end_time,
    evaluate_pair,
    extract_clusters,
    role_is,
)
from tglg.harness import aggregate_csv_text


def utt(role, start, end, text):
    return Utterance(role, start, end, text, token_count=len(text.split()))


histories = [
    InteractionHistory(
        id="nightstand-01",
        metadata={"category": "assemble nightstand"},
        utterances=(
            utt("assistant", 33.2, 43.3, "now remove the indicated component that's damaged"),
            utt("user", 45.3, 46.6, "oh, this thing?"),
            utt("assistant", 46.6, 47.4, "to the right"),
            utt("assistant", 47.9, 49.2, "the small cube"),
            utt("assistant", 49.3, 49.8, "yes"),
        ),
    ),
    InteractionHistory(
        id="coffee-07",
        metadata={"category": "make coffee with espresso machine"},
        utterances=(
            utt("assistant", 5.0, 7.0, "fill the water tank first"),
            utt("user", 9.0, 10.0, "like this?"),
            utt("assistant", 12.0, 13.5, "press the brew button now"),
        ),
    ),
]

stats = dataset_stats(histories)
print(f"dataset: {stats.size} datapoints, {stats.avg_utterances:.2f} utterances each, "
      f"{stats.avg_tokens:.2f} tokens per utterance, {stats.avg_gap_s:.2f}s mean gap")

instructor = role_is("assistant")
params = TraceParams()
embedder = MockEmbedder()

reports = []
for history in histories:
    for cluster in extract_clusters(history, instructor, window_s=5.0):
        instance = build_instance(history, cluster, fps=2.0)
        print(f"\ninstance {instance.instance_id}: {len(instance.context_utterances)} context "
              f"utterances, targets in [{instance.context_end_s:.1f}, {instance.eval_end_s:.1f}], "
              f"{len(instance.frame_times())} frames at {instance.frame_rate_fps} fps")

        # a fake model: right words, but late by 1.2s and without end times
        generated = []
        for target in instance.target_utterances:
            start = target.start_s + 1.2
            tokens = target.token_count or 1
            generated.append(
                Utterance("model", start, estimate_end_time(start, tokens),
                          target.text, token_count=tokens)
            )
        report = evaluate_pair(list(instance.target_utterances), generated, params, embedder)
        print(f"  TRACE={report.trace:.3f} semantic={report.semantic:.3f} "
              f"timing={report.timing:.3f}")
        reports.append(({"category": history.metadata["category"]}, report))

print("\nper-category table:")
print(aggregate_csv_text(aggregate(reports, HOLOASSIST_CATEGORIES)))
