"""Walk through the alignment pipeline stage by stage.

Shows how generated utterances get matched to reference utterances:
a start-time cost matrix, an optimal assignment, a similarity-driven
swap pass for out-of-order generations, and a final temporal prune.
"""

import numpy as np

from tglg import (
    MockEmbedder,
    TraceParams,
    Utterance,
    build_cost_matrix,
    build_similarity_matrix,
    prune_matching,
    refine_matching,
    solve_assignment,
)

np.set_printoptions(precision=3, suppress=True)

params = TraceParams()
embedder = MockEmbedder()

reference = [
    Utterance("commentator", 10.0, 11.5, "a shot on target"),
    Utterance("commentator", 12.0, 13.0, "saved by the keeper"),
    Utterance("commentator", 40.0, 41.0, "a substitution coming up"),
]
generated = [
    # the model announced the save first and the shot second (out of order),
    # plus one hallucinated call half a minute away from anything real
    Utterance("model", 10.4, 11.4, "saved by the keeper"),
    Utterance("model", 12.2, 13.4, "a shot on target there"),
    Utterance("model", 70.0, 71.0, "corner flag replay"),
]

gt_starts = [u.start_s for u in reference]
gen_starts = [u.start_s for u in generated]

print("reference starts:", gt_starts)
print("generated starts:", gen_starts)

cost = build_cost_matrix(gt_starts, gen_starts, params.tau_time)
print("\ncost matrix (closer starts cost less):")
print(cost.values)

initial = solve_assignment(cost)
print("\ninitial assignment (gt, gen):", initial.pairs)

sim = build_similarity_matrix(
    [u.text for u in reference], [u.text for u in generated], embedder
)
print("\ntext similarity matrix:")
print(sim.values)

refined = refine_matching(initial, sim, gt_starts, gen_starts, params.tau_win)
print("\nafter swap refinement:", refined.pairs)
print("  -> the out-of-order pair was crossed because both texts match better swapped")

final = prune_matching(refined, gt_starts, gen_starts, params.tau_win)
print("\nafter pruning's window of", params.tau_win, "s:", final.pairs)
print("  -> the 70s hallucination lost its match; reference #2 stays unmatched")

total = sum(sim.values[i, j] for i, j in final.pairs)
print(f"\nmatched similarity total: {total:.3f} over {len(final.pairs)} pairs")
