"""Command-line entry points.

Subcommands: simulate (run a scenario, write trace and report), detect
(replay recorded frames through the warm-object detector), train and
evaluate (the scheduling table), and report (summarise a trace file).

Exit codes are stable: 0 success, 1 usage error, 2 validation error,
3 I/O error.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional

from . import pipeline, scheduler
from .scenario import ScenarioError, load_scenario
from .thermal import DetectorConfig, DetectorState, as_frame, hot_pixel_mask, update_detector_from_mask

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_IO = 3


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # keep usage failures on our exit-code contract
        raise _UsageError(message)


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _cmd_simulate(args) -> int:
    bundle = load_scenario(args.scenario)
    with pipeline.Simulation(
        bundle,
        seed=args.seed,
        flag_path=args.flag_file,
        mode=args.mode,
        restart_ticks=args.restart_at_tick or (),
    ) as sim:
        sim.run_ticks(args.ticks)
        report = sim.report(trace_ref=args.trace)
        with open(args.trace, "w", encoding="utf-8") as fh:
            for record in sim.trace:
                fh.write(_dump(record) + "\n")
    payload = _dump(report.to_json_obj())
    if args.report is not None:
        with open(args.report, "w", encoding="utf-8") as fh:
            fh.write(payload + "\n")
    print(payload)
    return EXIT_OK


def _cmd_detect(args) -> int:
    config = DetectorConfig(delta_c=args.delta_c, min_hot_pixels=args.min_hot_pixels)
    state = DetectorState()
    with open(args.frames, "r", encoding="utf-8") as fh:
        lines = fh.readlines()
    out = []
    for lineno, line in enumerate(lines, start=1):
        line = line.strip()
        if not line:
            continue
        try:
            values = json.loads(line)
            frame = as_frame(values)
        except (json.JSONDecodeError, ValueError, TypeError) as exc:
            raise ScenarioError(f"line {lineno}", str(exc)) from exc
        mask = hot_pixel_mask(frame, config)
        state, detected = update_detector_from_mask(state, mask, config)
        out.append(
            {
                "flagged_count": int(mask.sum()),
                "detected": detected,
                "anchor": list(state.anchor) if state.anchor is not None else None,
            }
        )
    for record in out:
        print(_dump(record))
    return EXIT_OK


def _hyperparams(args) -> scheduler.Hyperparams:
    return scheduler.Hyperparams(
        alpha=args.alpha,
        gamma=args.gamma,
        epsilon=args.epsilon,
        epsilon_final=args.epsilon_final,
        episodes=args.episodes,
        r_danger=args.r_danger,
        r_cover=args.r_cover,
    )


def _cmd_train(args) -> int:
    bundle = load_scenario(args.scenario)
    table = scheduler.train(bundle.scenario, _hyperparams(args), args.seed)
    with open(args.table, "w", encoding="utf-8") as fh:
        json.dump(table.to_json_obj(), fh, sort_keys=True)
        fh.write("\n")
    return EXIT_OK


def _cmd_evaluate(args) -> int:
    bundle = load_scenario(args.scenario)
    with open(args.table, "r", encoding="utf-8") as fh:
        table = scheduler.QTable.from_json_obj(json.load(fh))
    expected = (
        bundle.scenario.schedule.slots_per_day,
        scheduler.n_actions(bundle.scenario),
    )
    if (table.n_slots, table.n_actions) != expected:
        raise ScenarioError(
            "$.table",
            f"table shape {(table.n_slots, table.n_actions)} does not match "
            f"scenario schedule {expected}",
        )
    rates = scheduler.evaluate_policy(table, bundle.scenario, args.days, args.seed)
    print(_dump(rates))
    return EXIT_OK


def _cmd_report(args) -> int:
    ticks = 0
    stops = 0
    detections = 0
    events: dict[str, int] = {}
    notifications = []
    last = None
    with open(args.trace, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                record = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ScenarioError(f"line {lineno}", f"invalid JSON: {exc}") from exc
            ticks += 1
            detections += record.get("detection", 0)
            for name in record.get("events", []):
                events[name] = events.get(name, 0) + 1
                if name == "warm_detected":
                    stops += 1
            notifications.extend(record.get("notifications", []))
            last = record
    summary = {
        "ticks": ticks,
        "detection_ticks": detections,
        "stops": stops,
        "events": events,
        "notifications": notifications,
        "final_status": last["status"] if last else None,
    }
    print(_dump(summary))
    return EXIT_OK


def _build_parser() -> _Parser:
    parser = _Parser(prog="mowsim", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    sim = sub.add_parser("simulate", help="run a scenario for N ticks")
    sim.add_argument("--scenario", required=True)
    sim.add_argument("--ticks", type=int, required=True)
    sim.add_argument("--seed", type=int, default=None)
    sim.add_argument("--trace", required=True, help="output JSON-lines trace path")
    sim.add_argument("--report", default=None, help="optional report JSON path")
    sim.add_argument("--flag-file", default=None, help="publish the detection bit here")
    sim.add_argument("--mode", choices=("virtual", "real-task"), default="virtual")
    sim.add_argument(
        "--restart-at-tick", type=int, action="append", default=None,
        help="inject a manual restart at this tick (repeatable)",
    )
    sim.set_defaults(func=_cmd_simulate)

    det = sub.add_parser("detect", help="replay recorded frames through the detector")
    det.add_argument("--frames", required=True, help="JSON-lines file, 768 numbers per line")
    det.add_argument("--delta-c", type=float, default=5.0)
    det.add_argument("--min-hot-pixels", type=int, default=4)
    det.set_defaults(func=_cmd_detect)

    tr = sub.add_parser("train", help="train the mowing-schedule table")
    tr.add_argument("--scenario", required=True)
    tr.add_argument("--table", required=True, help="output table JSON path")
    tr.add_argument("--episodes", type=int, default=1000)
    tr.add_argument("--alpha", type=float, default=0.5)
    tr.add_argument("--gamma", type=float, default=0.9)
    tr.add_argument("--epsilon", type=float, default=0.1)
    tr.add_argument("--epsilon-final", type=float, default=None)
    tr.add_argument("--r-danger", type=float, default=-10.0)
    tr.add_argument("--r-cover", type=float, default=1.0)
    tr.add_argument("--seed", type=int, default=0)
    tr.set_defaults(func=_cmd_train)

    ev = sub.add_parser("evaluate", help="evaluate a trained schedule table")
    ev.add_argument("--scenario", required=True)
    ev.add_argument("--table", required=True)
    ev.add_argument("--days", type=int, default=100)
    ev.add_argument("--seed", type=int, default=0)
    ev.set_defaults(func=_cmd_evaluate)

    rep = sub.add_parser("report", help="summarise a trace file")
    rep.add_argument("--trace", required=True)
    rep.set_defaults(func=_cmd_report)

    return parser


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except ScenarioError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
