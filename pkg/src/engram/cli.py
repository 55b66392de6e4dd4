"""Command-line front end: init, run, query, experiment, snapshot, report."""

from __future__ import annotations

import argparse
import sys

from .config import EngineConfig
from .engine import Engine
from .experiments import EXPERIMENTS, run_experiment
from .harness import report as harness_report
from .harness import run_scenario
from .model import EngineError, ScenarioEvent, canonical_json
from .persistence import load_snapshot, save_snapshot


def _build_parser() -> argparse.ArgumentParser:
    shared = argparse.ArgumentParser(add_help=False)
    shared.add_argument("--config", default=argparse.SUPPRESS,
                        help="engine config file (JSON, dotted keys)")
    shared.add_argument("--seed", type=int, default=argparse.SUPPRESS,
                        help="override config seed")
    parser = argparse.ArgumentParser(
        prog="engram", parents=[shared],
        description="Agent memory engine: scenario runs, experiments, snapshots.")
    sub = parser.add_subparsers(dest="command")

    p_init = sub.add_parser("init", parents=[shared],
                            help="write a config file with all defaults")
    p_init.add_argument("--out", default="engram.json")

    p_run = sub.add_parser("run", parents=[shared], help="run a scenario file")
    p_run.add_argument("scenario")
    p_run.add_argument("--out", help="metrics output path (JSON lines)")
    p_run.add_argument("--resume", help="snapshot to resume from")
    p_run.add_argument("--save", help="snapshot to write after the run")

    p_query = sub.add_parser("query", parents=[shared],
                             help="one-shot query against an engine")
    p_query.add_argument("text")
    p_query.add_argument("--concepts", default="",
                         help="comma-separated concept labels")
    p_query.add_argument("--resume", help="snapshot to load first")

    p_exp = sub.add_parser("experiment", parents=[shared],
                           help="run a bundled experiment")
    p_exp.add_argument("name", choices=list(EXPERIMENTS))
    p_exp.add_argument("--out", help="directory for the report file")

    p_snap = sub.add_parser("snapshot", parents=[shared],
                            help="save or load an engine snapshot")
    p_snap.add_argument("action", choices=["save", "load"])
    p_snap.add_argument("path")
    p_snap.add_argument("--from", dest="from_path",
                        help="existing snapshot to start from when saving")

    p_rep = sub.add_parser("report", parents=[shared],
                           help="summarize metrics files by window")
    p_rep.add_argument("metrics", nargs="+")
    p_rep.add_argument("--out-csv")
    p_rep.add_argument("--out-json")
    p_rep.add_argument("--window", type=int, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    if args.command is None:
        parser.print_usage()
        return 2
    try:
        config = EngineConfig.resolve(getattr(args, "config", None))
        seed = getattr(args, "seed", None)
        if seed is not None:
            config.seed = seed
        return _dispatch(args, config)
    except EngineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if args.command in ("init", "report", "snapshot") else 1


def _dispatch(args: argparse.Namespace, config: EngineConfig) -> int:
    if args.command == "init":
        config.save(args.out)
        print(f"wrote {args.out}")
        return 0

    if args.command == "run":
        engine = None
        if args.resume:
            engine = load_snapshot(args.resume, config=config)
        result = run_scenario(args.scenario, config=config,
                              out_path=args.out, engine=engine)
        if args.save:
            save_snapshot(result.engine, args.save)
        print(f"ran {len(result.records)} turns, "
              f"{len(result.probes)} probes, "
              f"final wm_size {result.records[-1].wm_size if result.records else 0}")
        return 0

    if args.command == "query":
        engine = load_snapshot(args.resume, config=config) if args.resume else Engine(config)
        labels = tuple(c.strip() for c in args.concepts.split(",") if c.strip())
        event = ScenarioEvent(turn=engine.turn + 1, type="query",
                              text=args.text, concepts=labels)
        engine.process_event(event)
        response = engine.last_response
        if response is None:
            print("no response produced", file=sys.stderr)
            return 1
        print(response.text)
        print(f"verdict={response.verdict.state} "
              f"confidence={response.verdict.confidence:.3f} mode={response.mode}")
        return 0

    if args.command == "experiment":
        report = run_experiment(args.name, config=config, out_dir=args.out)
        for assertion in report.assertions:
            print(assertion.line())
        print(f"{report.name}: {'PASS' if report.passed else 'FAIL'}")
        return 0 if report.passed else 1

    if args.command == "snapshot":
        if args.action == "save":
            engine = (load_snapshot(args.from_path, config=config)
                      if args.from_path else Engine(config))
            save_snapshot(engine, args.path)
            print(f"saved snapshot to {args.path}")
            return 0
        engine = load_snapshot(args.path, config=config)
        print(f"loaded snapshot: turn {engine.turn}, "
              f"{len(engine.graph.concept_ids())} concepts, "
              f"{len(engine.graph.episode_ids())} episodes, "
              f"wm_size {len(engine.wm)}")
        return 0

    if args.command == "report":
        window = args.window or config.harness.window
        summary = harness_report(args.metrics, window=window,
                                 csv_path=args.out_csv, json_path=args.out_json)
        for entry in summary["files"]:
            print(f"{entry['path']}: {entry['records']} records, "
                  f"{len(entry['windows'])} windows")
        if not args.out_csv and not args.out_json:
            print(canonical_json(summary))
        return 0

    return 2


if __name__ == "__main__":
    raise SystemExit(main())
