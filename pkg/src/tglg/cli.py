"""Command-line front door.

Subcommands: ``evaluate`` (score generated streams against ground
truth), ``simulate`` (run the decoding simulators on script files),
``aggregate`` (per-category means and model deltas), ``stats``
(dataset statistics).

Exit codes: 0 success, 1 usage or configuration error, 2 data error,
3 remote-embedder transport failure. All metric defaults mirror the
reference evaluation configuration, so a bare invocation reproduces it.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Sequence

from . import harness, sim
from .core import GeneratedStream, TraceParams, TraceReport
from .embed import ENDPOINT_ENV_VAR, select_embedder
from .errors import DataFormatError, EmbeddingTransportError, ParameterError, TglgError
from .score import evaluate_pair

SUMMARY_COLUMNS = ("trace", "semantic", "timing", "start", "end", "overlap", "f1")
SUMMARY_HEADERS = ("TRACE", "S^a", "S^t", "S^start", "S^end", "S^overlap", "F1")


class _Parser(argparse.ArgumentParser):
    def error(self, message: str) -> None:  # usage errors exit 1, not argparse's 2
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tglg", description=__doc__)
    parser.add_argument("--seed", type=int, default=0, help="seed for randomized fixtures (reserved)")
    sub = parser.add_subparsers(dest="command", required=True)

    p_eval = sub.add_parser("evaluate", help="score generated streams against ground truth")
    p_eval.add_argument("gt_path", help="ground-truth instance file (JSONL)")
    p_eval.add_argument("gen_path", help="generated-stream file (JSONL)")
    p_eval.add_argument("--out", required=True, help="report file to write (JSONL)")
    _add_params_flags(p_eval)
    p_eval.add_argument("--embed-endpoint", default=None, help=f"sidecar URL (or ${ENDPOINT_ENV_VAR})")
    p_eval.add_argument("--jobs", type=int, default=1, help="parallel instance evaluations")
    p_eval.add_argument("--scale", choices=("unit", "percent"), default="percent")

    p_sim = sub.add_parser("simulate", help="run the decoding simulators")
    p_sim.add_argument("frames_path", help="frame script (JSON)")
    p_sim.add_argument("policy_path", help="policy script (JSON)")
    p_sim.add_argument("--mode", choices=("tsi", "turn", "both"), default="both")
    p_sim.add_argument("--out", required=True, help="output path prefix")
    p_sim.add_argument("--duration", type=float, default=30.0)
    p_sim.add_argument("--token-rate", type=float, default=2.0)
    p_sim.add_argument("--fps", type=float, default=2.0)
    p_sim.add_argument("--eos-threshold", type=float, default=0.725)
    p_sim.add_argument("--instance-id", default=None)

    p_agg = sub.add_parser("aggregate", help="per-category means, optionally vs a baseline")
    p_agg.add_argument("report_paths", nargs="+", help="one or two report files")
    p_agg.add_argument(
        "--category-map",
        default="soccernet",
        help="builtin map name (soccernet|holoassist) or a JSON file path",
    )
    p_agg.add_argument("--out", default=None, help="CSV output path (default: stdout)")

    p_stats = sub.add_parser("stats", help="dataset statistics for a history file")
    p_stats.add_argument("history_path")
    return parser


def _add_params_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--params", default=None, help="JSON file of metric parameters")
    for flag in ("alpha", "alpha-start", "alpha-end", "tau-time", "tau-win", "tau-pen"):
        parser.add_argument(f"--{flag}", type=float, default=None)


def resolve_params(args: argparse.Namespace) -> TraceParams:
    record: dict[str, Any] = {}
    if args.params:
        with open(args.params, encoding="utf-8") as handle:
            record.update(json.load(handle))
    for name in ("alpha", "alpha_start", "alpha_end", "tau_time", "tau_win", "tau_pen"):
        value = getattr(args, name)
        if value is not None:
            record[name] = value
    return TraceParams.from_record(record) if record else TraceParams()


def _format_summary(means: dict[str, float], scale: str) -> str:
    if scale == "percent":
        cells = [f"{means[c] * 100.0:.1f}" for c in SUMMARY_COLUMNS]
    else:
        cells = [f"{means[c]:.3f}" for c in SUMMARY_COLUMNS]
    width = 10
    header = "".join(h.rjust(width) for h in SUMMARY_HEADERS)
    row = "".join(c.rjust(width) for c in cells)
    return header + "\n" + row


def cmd_evaluate(args: argparse.Namespace) -> int:
    params = resolve_params(args)
    embedder = select_embedder(args.embed_endpoint)
    gt_entries = harness.load_instance_streams(
        args.gt_path, default_role="reference", allow_missing_end=False
    )
    gen_entries = harness.load_instance_streams(
        args.gen_path, default_role="model", allow_missing_end=True
    )
    gt_by_id = {e.instance_id: e for e in gt_entries}
    gen_by_id = {e.instance_id: e for e in gen_entries}
    orphans = sorted(set(gen_by_id) - set(gt_by_id))
    for instance_id in orphans:
        print(f"warning: generated instance '{instance_id}' has no ground truth; skipped",
              file=sys.stderr)
    if gen_entries and len(orphans) == len(gen_entries) and gt_entries:
        print("error: no generated instance matches any ground-truth instance", file=sys.stderr)
        return 2

    def score_one(entry: harness.InstanceStream) -> harness.InstanceReport:
        gen_entry = gen_by_id.get(entry.instance_id)
        gen_stream = gen_entry.stream if gen_entry else GeneratedStream(utterances=())
        report = evaluate_pair(
            list(entry.stream.utterances), list(gen_stream.utterances), params, embedder
        )
        return harness.InstanceReport(
            instance_id=entry.instance_id,
            category=entry.category,
            params=params,
            report=report,
        )

    ordered = sorted(gt_by_id.values(), key=lambda e: e.instance_id)
    if args.jobs > 1:
        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(score_one, ordered))
    else:
        results = [score_one(e) for e in ordered]
    harness.write_jsonl((harness.report_to_record(r) for r in results), args.out)
    means = _mean_report_fields([r.report for r in results])
    print(_format_summary(means, args.scale))
    return 0


def _mean_report_fields(reports: Sequence[TraceReport]) -> dict[str, float]:
    if not reports:
        return {c: 0.0 for c in SUMMARY_COLUMNS}
    return {
        c: sum(getattr(r, c) for r in reports) / len(reports) for c in SUMMARY_COLUMNS
    }


def cmd_simulate(args: argparse.Namespace) -> int:
    config = sim.SimConfig(
        duration_s=args.duration,
        frame_rate_fps=args.fps,
        token_rate_tps=args.token_rate,
        eos_threshold=args.eos_threshold,
    )
    frames = sim.load_frames(args.frames_path, fps=args.fps)
    instance_id = args.instance_id or Path(args.frames_path).stem
    modes = ("tsi", "turn") if args.mode == "both" else (args.mode,)
    for mode in modes:
        policy = sim.load_policy(args.policy_path)
        runner = sim.run_tsi if mode == "tsi" else sim.run_turn_based
        timeline = runner(policy, frames, config)
        prefix = f"{args.out}.{mode}"
        harness.write_jsonl(
            [sim.timeline_to_stream_record(timeline, instance_id)], f"{prefix}.stream.jsonl"
        )
        harness.write_jsonl(
            (sim.event_to_record(e) for e in timeline.events), f"{prefix}.events.jsonl"
        )
        print(f"{mode}: {len(timeline.stream.utterances)} utterances, "
              f"{len(timeline.events)} events -> {prefix}.stream.jsonl")
    return 0


def cmd_aggregate(args: argparse.Namespace) -> int:
    if len(args.report_paths) > 2:
        print("error: aggregate takes one or two report files", file=sys.stderr)
        return 1
    name = args.category_map
    if name in harness.BUILTIN_CATEGORY_MAPS:
        category_map = harness.BUILTIN_CATEGORY_MAPS[name]
    else:
        category_map = harness.category_map_from_file(name)
    primary = [(_report_metadata(r), r.report) for r in harness.load_reports(args.report_paths[0])]
    baseline = None
    if len(args.report_paths) == 2:
        baseline = [
            (_report_metadata(r), r.report) for r in harness.load_reports(args.report_paths[1])
        ]
    warnings: list[str] = []
    rows = harness.aggregate(primary, category_map, baseline=baseline, warnings=warnings)
    for w in warnings:
        print(f"warning: {w}", file=sys.stderr)
    if args.out:
        harness.write_aggregate_csv(rows, args.out)
    else:
        sys.stdout.write(harness.aggregate_csv_text(rows))
    return 0


def _report_metadata(entry: harness.InstanceReport) -> dict[str, str]:
    return {"category": entry.category}


def cmd_stats(args: argparse.Namespace) -> int:
    result = harness.load_histories(args.history_path)
    for warning in result.warnings:
        print(f"warning: {warning}", file=sys.stderr)
    stats = harness.dataset_stats(result.histories)
    record = stats.to_record()
    record["warnings"] = result.warning_count
    print(json.dumps(record))
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {
        "evaluate": cmd_evaluate,
        "simulate": cmd_simulate,
        "aggregate": cmd_aggregate,
        "stats": cmd_stats,
    }
    try:
        return handlers[args.command](args)
    except EmbeddingTransportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except DataFormatError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ParameterError, TglgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
