"""Score a few generation patterns and print the metric decomposition.

Reproduces the classic failure-mode signatures: a well-timed response,
a delayed start, a premature cutoff, and self-overlapping output each
leave a distinct fingerprint across the component scores.
"""

from tglg import MockEmbedder, TraceParams, Utterance, evaluate_pair

params = TraceParams()
embedder = MockEmbedder()

reference = [
    Utterance("commentator", 20.0, 22.0, "here comes the striker down the wing"),
    Utterance("commentator", 25.0, 27.5, "and the cross is headed over the bar"),
]


def show(name, generated):
    report = evaluate_pair(reference, generated, params, embedder)
    print(f"{name:18s} TRACE={report.trace:.3f}  semantic={report.semantic:.3f}  "
          f"timing={report.timing:.3f}  start={report.start:.3f}  "
          f"end={report.end:.3f}  overlap={report.overlap:.3f}  f1={report.f1:.3f}")
    for p in report.pair_details:
        print(f"{'':18s}  pair gt{p.gt_index}->gen{p.gen_index}: sim={p.similarity:.3f} "
              f"start={p.start_component:.3f} end={p.end_component:.3f}")


show("on time", [
    Utterance("model", 20.1, 22.0, "the striker runs down the wing"),
    Utterance("model", 25.2, 27.4, "the cross goes over the bar"),
])

show("delayed start", [
    Utterance("model", 25.0, 27.0, "the striker runs down the wing"),  # 5s late
    Utterance("model", 30.0, 32.4, "the cross goes over the bar"),
])

show("premature cutoff", [
    Utterance("model", 20.1, 20.6, "striker"),  # ends ~1.4s early
    Utterance("model", 25.2, 25.7, "cross over"),
])

show("self overlap", [
    Utterance("model", 20.1, 26.0, "the striker runs down the wing"),  # runs long
    Utterance("model", 25.0, 27.5, "the cross goes over the bar"),     # overlaps it
])

show("stays silent", [])

print("""
Reading the fingerprints: the delayed run keeps its semantics but start/end
components collapse exponentially; the cutoff keeps starts high but loses the
end score; the overlapping pair is the only one whose overlap column drops
below F1; silence zeroes everything through the F1 factor.""")
