"""Discrete-time simulation of streaming decoders.

Two runners share one policy protocol:

* :func:`run_tsi` interleaves perception and generation on a shared
  timeline: frames are ingested (at zero slot cost) before every decode
  slot, including slots in the middle of an utterance.
* :func:`run_turn_based` freezes perception while speaking: a frame
  arriving mid-utterance is queued and ingested only after the
  utterance completes, so delays compound.

Decode slots are ``k / token_rate_tps`` seconds. A BEGIN decision
occupies one slot (the start-of-utterance marker), so an utterance's
start time is its first TOKEN slot and its end time its last TOKEN
slot; markers are never appended to the context, fragments are. Both
runners are single-threaded deterministic event loops: identical
(policy, frames, config) inputs reproduce the timeline bit for bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Protocol, Sequence

from .core import GeneratedStream, Utterance
from .errors import DataFormatError, ParameterError, PolicyConfigError, PolicyProtocolError

_TIME_EPS = 1e-9


@dataclass(frozen=True)
class SimConfig:
    """Rates and bounds of one run.

    ``eos_threshold`` is consulted by the turn-based runner only. A zero
    duration is legal and produces an empty run.
    """

    duration_s: float
    frame_rate_fps: float = 2.0
    token_rate_tps: float = 2.0
    eos_threshold: float = 0.725

    def __post_init__(self) -> None:
        if self.frame_rate_fps <= 0 or self.token_rate_tps <= 0:
            raise ParameterError("frame and token rates must be positive")
        if self.duration_s < 0:
            raise ParameterError(f"duration_s must be non-negative, got {self.duration_s!r}")
        if not (0.0 <= self.eos_threshold <= 1.0):
            raise ParameterError(f"eos_threshold must lie in [0, 1], got {self.eos_threshold!r}")


@dataclass(frozen=True)
class FrameEvent:
    time_s: float
    label: str


class DecisionKind(Enum):
    SILENT = "silent"
    BEGIN = "begin"
    TOKEN = "token"
    END = "end"


@dataclass(frozen=True)
class PolicyDecision:
    """One decode-step outcome.

    ``eos_probability`` gates the turn-based runner only: at or above
    the threshold the model stays silent for that frame.
    """

    kind: DecisionKind
    fragment: str = ""
    eos_probability: float = 1.0

    def __post_init__(self) -> None:
        if self.kind is DecisionKind.TOKEN and not self.fragment:
            raise ParameterError("TOKEN decisions must carry a non-empty fragment")


@dataclass(frozen=True)
class PolicyView:
    """What the policy can see at one decode step: every frame ingested so
    far (never the queued ones), whether an utterance is open and its
    fragments, and the full transcript of fragments emitted this run
    (markers are never part of the context)."""

    time_s: float
    frames: tuple[FrameEvent, ...]
    generating: bool
    fragments: tuple[str, ...]
    transcript: tuple[str, ...] = ()


class Policy(Protocol):
    def reset(self) -> None: ...

    def decide(self, view: PolicyView) -> PolicyDecision: ...


class EventKind(Enum):
    FRAME_INGESTED = "frame-ingested"
    FRAME_QUEUED = "frame-queued"
    UTTERANCE_START = "utterance-start"
    TOKEN_EMITTED = "token-emitted"
    UTTERANCE_END = "utterance-end"


@dataclass(frozen=True)
class SimEvent:
    time_s: float
    kind: EventKind
    payload: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class SimTimeline:
    """Event log plus the resulting stream; log times are non-decreasing."""

    events: tuple[SimEvent, ...]
    stream: GeneratedStream
    mode: str
    config: SimConfig

    def events_of(self, kind: EventKind) -> list[SimEvent]:
        return [e for e in self.events if e.kind is kind]


class _Machine:
    """State shared by both runners: context, open utterance, event log."""

    def __init__(self, policy: Policy, config: SimConfig) -> None:
        self.policy = policy
        self.config = config
        self.events: list[SimEvent] = []
        self.utterances: list[Utterance] = []
        self.frames_seen: list[FrameEvent] = []
        self.fragments: list[str] = []
        self.token_times: list[float] = []
        self.transcript: list[str] = []
        self.generating = False

    def log(self, time_s: float, kind: EventKind, **payload: Any) -> None:
        self.events.append(SimEvent(time_s=time_s, kind=kind, payload=payload))

    def ingest(self, frame: FrameEvent, at: float) -> None:
        self.frames_seen.append(frame)
        self.log(at, EventKind.FRAME_INGESTED, label=frame.label, frame_time=frame.time_s)

    def view(self, time_s: float) -> PolicyView:
        return PolicyView(
            time_s=time_s,
            frames=tuple(self.frames_seen),
            generating=self.generating,
            fragments=tuple(self.fragments),
            transcript=tuple(self.transcript),
        )

    def emit_token(self, fragment: str, at: float) -> None:
        if not self.token_times:
            self.log(at, EventKind.UTTERANCE_START, index=len(self.utterances))
        self.token_times.append(at)
        self.fragments.append(fragment)
        self.transcript.append(fragment)
        self.log(at, EventKind.TOKEN_EMITTED, text=fragment)

    def close_utterance(self, at: float) -> None:
        """Close the open utterance; a BEGIN/END with no tokens emits nothing."""
        if self.token_times:
            utterance = Utterance(
                speaker_role="model",
                start_s=self.token_times[0],
                end_s=self.token_times[-1],
                text=" ".join(self.fragments),
                token_count=len(self.fragments),
            )
            self.utterances.append(utterance)
            self.log(
                at,
                EventKind.UTTERANCE_END,
                index=len(self.utterances) - 1,
                start=utterance.start_s,
                end=utterance.end_s,
                text=utterance.text,
            )
        self.fragments = []
        self.token_times = []

    def finish(self, mode: str) -> SimTimeline:
        return SimTimeline(
            events=tuple(self.events),
            stream=GeneratedStream(utterances=tuple(self.utterances)),
            mode=mode,
            config=self.config,
        )


def _decide(machine: _Machine, at: float) -> PolicyDecision:
    decision = machine.policy.decide(machine.view(at))
    kind = decision.kind
    if not machine.generating and kind is DecisionKind.TOKEN:
        raise PolicyProtocolError(f"policy emitted TOKEN outside generation mode at slot {at}")
    if machine.generating and kind is DecisionKind.SILENT:
        raise PolicyProtocolError(f"policy emitted SILENT inside generation mode at slot {at}")
    return decision


def run_tsi(policy: Policy, frames: Sequence[FrameEvent], config: SimConfig) -> SimTimeline:
    """Time-synchronized interleaving.

    Before each slot, every frame with arrival time at or before the
    slot enters the context — including mid-utterance, which is what
    lets a policy react to new input without first falling silent.
    Outside generation mode a non-BEGIN decision is discarded; BEGIN
    enters generation mode. Inside it, TOKEN extends the utterance, END
    closes it, and BEGIN closes it and opens the next one. By
    construction no two emitted utterances ever intersect in time.
    """
    frames = _check_sorted(frames)
    machine = _Machine(policy, config)
    policy.reset()
    pending = list(frames)
    step = 1.0 / config.token_rate_tps
    k = 1
    while k * step <= config.duration_s + _TIME_EPS:
        t = k * step
        while pending and pending[0].time_s <= t:
            machine.ingest(pending.pop(0), at=t)
        decision = _decide(machine, t)
        if not machine.generating:
            if decision.kind is DecisionKind.BEGIN:
                machine.generating = True
        else:
            if decision.kind is DecisionKind.TOKEN:
                machine.emit_token(decision.fragment, at=t)
            elif decision.kind is DecisionKind.END:
                machine.close_utterance(at=t)
                machine.generating = False
            elif decision.kind is DecisionKind.BEGIN:
                machine.close_utterance(at=t)
        k += 1
    if machine.generating:
        machine.close_utterance(at=min(config.duration_s, k * step))
    return machine.finish("tsi")


def run_turn_based(
    policy: Policy, frames: Sequence[FrameEvent], config: SimConfig
) -> SimTimeline:
    """Turn-based baseline with streaming end-of-turn gating.

    Each newly ingested frame (only possible while idle) yields one
    policy decision: at or above ``eos_threshold`` the model stays
    silent, otherwise a BEGIN starts a full utterance decoded
    token-by-token with perception frozen. Frames arriving meanwhile are
    queued and ingested only after the utterance completes, where they
    may immediately trigger further generation — the compounding-delay
    pathology this runner exists to reproduce.
    """
    frames = _check_sorted(frames)
    machine = _Machine(policy, config)
    policy.reset()
    pending = list(frames)
    queue: list[FrameEvent] = []
    step = 1.0 / config.token_rate_tps
    now = 0.0

    def generate(trigger_time: float) -> float | None:
        """Decode one turn; returns the completion time, or None on truncation."""
        machine.generating = True
        k = 1
        while True:
            t = trigger_time + k * step
            if t > config.duration_s + _TIME_EPS:
                while pending and pending[0].time_s <= config.duration_s + _TIME_EPS:
                    frame = pending.pop(0)
                    queue.append(frame)
                    machine.log(frame.time_s, EventKind.FRAME_QUEUED, label=frame.label)
                machine.close_utterance(at=config.duration_s)
                machine.generating = False
                return None
            while pending and pending[0].time_s < t:
                frame = pending.pop(0)
                queue.append(frame)
                machine.log(frame.time_s, EventKind.FRAME_QUEUED, label=frame.label)
            decision = _decide(machine, t)
            if decision.kind is DecisionKind.TOKEN:
                machine.emit_token(decision.fragment, at=t)
            elif decision.kind is DecisionKind.BEGIN:
                machine.close_utterance(at=t)
            else:  # END
                machine.close_utterance(at=t)
                machine.generating = False
                return t
            k += 1

    while True:
        if queue:
            frame = queue.pop(0)
            ingest_at = now
        elif pending and pending[0].time_s <= config.duration_s + _TIME_EPS:
            frame = pending.pop(0)
            ingest_at = max(now, frame.time_s)
        else:
            break
        machine.ingest(frame, at=ingest_at)
        decision = _decide(machine, ingest_at)
        if decision.eos_probability >= config.eos_threshold:
            now = ingest_at
            continue
        if decision.kind is DecisionKind.BEGIN:
            completed = generate(ingest_at)
            if completed is None:
                break
            now = completed
        else:
            now = ingest_at
    return machine.finish("turn")


def _check_sorted(frames: Sequence[FrameEvent]) -> list[FrameEvent]:
    frames = list(frames)
    for a, b in zip(frames, frames[1:]):
        if b.time_s <= a.time_s:
            raise ParameterError(
                f"frame times must be strictly increasing, got {a.time_s} then {b.time_s}"
            )
    return frames


# --- scripted policies -------------------------------------------------


@dataclass(frozen=True)
class ReviseRule:
    """Mid-utterance reaction: swap the remaining fragments (amend) or
    close the utterance and speak the new fragments instead (interrupt)."""

    trigger: str
    fragments: tuple[str, ...]
    interrupt: bool = False


@dataclass(frozen=True)
class TriggerRule:
    trigger: str
    fragments: tuple[str, ...]
    eos_probability: float = 0.0
    revise_on: ReviseRule | None = None


class ScriptedPolicy:
    """Deterministic test double for a streaming decoder.

    When idle, the earliest not-yet-consumed frame whose label matches a
    rule starts that rule's utterance (each frame occurrence can fire at
    most one rule, so a label handled mid-utterance is not announced
    again later). While speaking, the active rule's ``revise_on`` may
    react to a newly visible frame. With no matching frames the policy
    stays silent forever.
    """

    def __init__(self, rules: Sequence[TriggerRule]) -> None:
        triggers = [rule.trigger for rule in rules]
        if len(set(triggers)) != len(triggers):
            raise PolicyConfigError(f"duplicate trigger labels in script: {sorted(triggers)}")
        self.rules = tuple(rules)
        self.reset()

    def reset(self) -> None:
        self._consumed: set[int] = set()
        self._pending: list[str] = []
        self._active: TriggerRule | None = None
        self._revised = False

    def _first_unconsumed(self, view: PolicyView, label: str) -> int | None:
        for idx, frame in enumerate(view.frames):
            if idx not in self._consumed and frame.label == label:
                return idx
        return None

    def decide(self, view: PolicyView) -> PolicyDecision:
        if view.generating:
            rule = self._active
            if rule is not None and rule.revise_on is not None and not self._revised:
                idx = self._first_unconsumed(view, rule.revise_on.trigger)
                if idx is not None:
                    self._consumed.add(idx)
                    self._revised = True
                    self._pending = list(rule.revise_on.fragments)
                    if rule.revise_on.interrupt:
                        return PolicyDecision(DecisionKind.BEGIN, eos_probability=0.0)
            if self._pending:
                return PolicyDecision(
                    DecisionKind.TOKEN, fragment=self._pending.pop(0), eos_probability=0.0
                )
            self._active = None
            return PolicyDecision(DecisionKind.END, eos_probability=0.0)
        for rule in self.rules:
            idx = self._first_unconsumed(view, rule.trigger)
            if idx is not None:
                self._consumed.add(idx)
                self._active = rule
                self._revised = False
                self._pending = list(rule.fragments)
                return PolicyDecision(
                    DecisionKind.BEGIN, eos_probability=rule.eos_probability
                )
        return PolicyDecision(DecisionKind.SILENT, eos_probability=1.0)


def scripted_policy(rules: Sequence[TriggerRule]) -> ScriptedPolicy:
    return ScriptedPolicy(rules)


class SilentPolicy:
    """Never speaks; reports certain end-of-turn everywhere."""

    def reset(self) -> None:
        pass

    def decide(self, view: PolicyView) -> PolicyDecision:
        return PolicyDecision(DecisionKind.SILENT, eos_probability=1.0)


# --- declarative script files ------------------------------------------


def load_frames(path: str | Path, fps: float = 2.0) -> list[FrameEvent]:
    """Frames from JSON: ``[{"time": s, "label": l}, ...]`` or a bare list
    of labels placed at ``k / fps`` seconds."""
    with open(path, encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise DataFormatError(f"{path}: frame script must be a JSON list")
    frames: list[FrameEvent] = []
    for i, item in enumerate(data):
        if isinstance(item, str):
            frames.append(FrameEvent(time_s=(i + 1) / fps, label=item))
        elif isinstance(item, dict) and "time" in item and "label" in item:
            frames.append(FrameEvent(time_s=float(item["time"]), label=str(item["label"])))
        else:
            raise DataFormatError(f"{path}: frame entry {i} must be a label or {{time, label}}")
    return _check_sorted(frames)


def load_policy(path: str | Path) -> ScriptedPolicy:
    """Policy from JSON: a list of ``{"trigger", "fragments",
    "eos_probability"?, "revise_on"?: {"trigger", "fragments", "interrupt"?}}``."""
    with open(path, encoding="utf-8") as handle:
        try:
            data = json.load(handle)
        except json.JSONDecodeError as exc:
            raise DataFormatError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, list):
        raise DataFormatError(f"{path}: policy script must be a JSON list")
    rules = []
    for i, item in enumerate(data):
        try:
            revise = item.get("revise_on")
            rules.append(
                TriggerRule(
                    trigger=str(item["trigger"]),
                    fragments=tuple(map(str, item["fragments"])),
                    eos_probability=float(item.get("eos_probability", 0.0)),
                    revise_on=ReviseRule(
                        trigger=str(revise["trigger"]),
                        fragments=tuple(map(str, revise["fragments"])),
                        interrupt=bool(revise.get("interrupt", False)),
                    )
                    if revise
                    else None,
                )
            )
        except (KeyError, TypeError) as exc:
            raise DataFormatError(f"{path}: rule {i} malformed ({exc})") from exc
    return ScriptedPolicy(rules)


def timeline_to_stream_record(timeline: SimTimeline, instance_id: str) -> dict[str, Any]:
    """Generated-stream record in the instance-file schema."""
    return {
        "instance_id": instance_id,
        "utterances": [
            {
                "start": u.start_s,
                "end": u.end_s,
                "text": u.text,
                "tokens": u.token_count,
            }
            for u in timeline.stream.utterances
        ],
    }


def event_to_record(event: SimEvent) -> dict[str, Any]:
    return {"time": event.time_s, "kind": event.kind.value, **dict(event.payload)}
