from __future__ import annotations

import pytest
from hypothesis import given, strategies as st

from tglg.core import (
    InteractionHistory,
    TraceParams,
    Utterance,
    estimate_token_count,
    history_from_record,
    history_to_record,
    sort_utterances,
    validate_history,
)
from tglg.errors import ParameterError


def u(start, end, role="commentator", text="something happened", tokens=3):
    return Utterance(speaker_role=role, start_s=start, end_s=end, text=text, token_count=tokens)


def test_valid_history_has_no_violations():
    history = InteractionHistory(id="h", utterances=(u(0.0, 1.0), u(2.0, 3.0)))
    assert validate_history(history) == []


def test_reversed_bounds_reported_with_index():
    history = InteractionHistory(id="h", utterances=(u(5.0, 4.0),))
    violations = validate_history(history)
    assert len(violations) == 1
    assert "utterance 0" in violations[0]
    assert "start_s" in violations[0]


def test_out_of_order_utterances_reported():
    history = InteractionHistory(id="h", utterances=(u(3.0, 4.0), u(1.0, 2.0)))
    violations = validate_history(history)
    assert len(violations) == 1
    assert "order" in violations[0]


def test_nonempty_text_with_zero_token_count_reported():
    bad = Utterance("commentator", 0.0, 1.0, "text", token_count=0)
    history = InteractionHistory(id="h", utterances=(bad,))
    assert any("token_count" in v for v in validate_history(history))


def test_validate_never_mutates():
    history = InteractionHistory(id="h", utterances=(u(5.0, 4.0),))
    before = history_to_record(history)
    validate_history(history)
    assert history_to_record(history) == before


times = st.floats(min_value=0, max_value=1e4, allow_nan=False, allow_infinity=False)


@st.composite
def histories(draw):
    n = draw(st.integers(min_value=0, max_value=8))
    utterances = []
    for _ in range(n):
        start = draw(times)
        length = draw(st.floats(min_value=0, max_value=30))
        text = draw(st.text(min_size=0, max_size=12))
        utterances.append(
            Utterance(
                speaker_role=draw(st.sampled_from(["instructor", "user", "commentator"])),
                start_s=start,
                end_s=start + length,
                text=text,
                token_count=draw(st.integers(min_value=1, max_value=40)) if text else None,
                dialogue_acts=tuple(draw(st.lists(st.sampled_from(["a", "b"]), max_size=2))),
            )
        )
    return InteractionHistory(
        id=draw(st.text(min_size=1, max_size=8)),
        utterances=sort_utterances(utterances),
        metadata={"category": draw(st.sampled_from(["Goal", "Corner", ""]))},
    )


@given(histories())
def test_serialization_round_trip(history):
    assert history_from_record(history_to_record(history)) == history


@given(histories())
def test_sorting_already_sorted_is_identity(history):
    assert sort_utterances(history.utterances) == history.utterances


def test_params_defaults_match_reference_configuration():
    params = TraceParams()
    assert (params.tau_time, params.tau_win, params.tau_pen) == (3.0, 5.0, 1.0)
    assert (params.alpha_start, params.alpha_end, params.alpha) == (0.4, 0.4, 0.5)


@pytest.mark.parametrize(
    "kwargs",
    [
        {"tau_time": 0.0},
        {"tau_pen": -1.0},
        {"alpha": 1.5},
        {"alpha_start": 0.7, "alpha_end": 0.6},
        {"max_refine_passes": 0},
    ],
)
def test_params_validation(kwargs):
    with pytest.raises(ParameterError):
        TraceParams(**kwargs)


def test_estimate_token_count_rounds_up():
    assert estimate_token_count("one two three") == 4  # 3 * 1.3 = 3.9
    assert estimate_token_count("word") == 2  # 1.3 -> rounds up
    assert estimate_token_count("") == 1
