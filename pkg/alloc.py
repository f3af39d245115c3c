"""Command-line entry point for the course allocation engine."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import constants
from utils.baselines import brute_force_leximin, brute_force_max_usw, max_usw_flow
from utils.compute import (
    RUNNABLE,
    compare_mechanisms,
    make_synthesizer,
    run,
    runtime_sweep,
    stress_sweep,
    synthetic_approval_bands,
    synthetic_cohort,
)
from utils.config import MECHANISMS, MODES, RunConfig
from utils.core import InputError, InvariantError
from utils.io import load_responses, load_schedule, read_responses_frame, read_schedule_frame, write_responses, write_table
from utils.prep import assign_slots, build_instance, effective_respondents, normalize_status
from utils.quality import quality_report
from utils.yankee_swap import run_yankee_swap

logger = logging.getLogger("alloc")


def _add_data_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--schedule", type=Path, default=Path("data") / constants.SCHEDULE_FILENAME)
    p.add_argument("--responses", type=Path, default=Path("data") / constants.RESPONSES_FILENAME)
    p.add_argument("--columns", type=Path, default=None, help="CSV sidecar with source,target column renames")


def _add_instance_args(p: argparse.ArgumentParser) -> None:
    _add_data_args(p)
    p.add_argument("--k", type=int, default=constants.DEFAULT_K)
    p.add_argument("--seed", type=int, default=constants.RANDOM_SEED)
    p.add_argument("--mode", choices=MODES, default="real")
    p.add_argument("--cohort", type=int, default=None)
    p.add_argument("--scale", type=float, default=1.0)
    p.add_argument("--ell", type=int, default=constants.DEFAULT_ELL)
    p.add_argument("--check", action="store_true", help="audit Yankee Swap state against a full rebuild every iteration")


def _config(args, **overrides) -> RunConfig:
    fields = dict(
        seed=args.seed, k=args.k, scale=args.scale, mode=args.mode, cohort=args.cohort, ell=args.ell,
        schedule=args.schedule, responses=args.responses, columns=args.columns, check=args.check,
        out=getattr(args, "out", Path("out")),
    )
    fields.update(overrides)
    return RunConfig(**fields)


def _inputs(config: RunConfig):
    item_types = load_schedule(config.schedule)
    respondents = effective_respondents(load_responses(config.responses, item_types, config.columns))
    cache = config.responses.parent / constants.SYNTH_CACHE_DIRNAME
    return item_types, respondents, make_synthesizer(respondents, item_types, config.ell, config.seed, cache)


def cmd_run(args) -> None:
    config = _config(args, mechanism=args.mechanism, timing=not args.no_timing)
    report = run(config)
    print(json.dumps(report.get("metrics", report.get("ilp")), indent=2))


def cmd_synth(args) -> None:
    item_types = load_schedule(args.schedule)
    respondents = effective_respondents(load_responses(args.responses, item_types, args.columns))
    status = normalize_status(args.status)
    synth = synthetic_cohort(respondents, item_types, status, args.count, args.ell, args.seed)
    write_responses(synth, item_types, args.out)
    print(f"-> Wrote {len(synth)} synthetic {status} students to {args.out}")


def cmd_oracle(args) -> None:
    config = _config(args)
    item_types, respondents, synthesize = _inputs(config)
    instance = build_instance(config, item_types, respondents, synthesize)
    alloc, stats = run_yankee_swap(instance, seed=config.seed, check=True)
    ys_sorted = tuple(sorted(int(u) for u in alloc.utilities(instance.valuations)))
    leximin = brute_force_leximin(instance, args.max_states)
    best_usw = brute_force_max_usw(instance, args.max_states)
    flow_usw = int(max_usw_flow(instance).utilities(instance.valuations).sum())
    result = {"ys": list(ys_sorted), "leximin": list(leximin), "ys_usw": sum(ys_sorted), "flow_usw": flow_usw, "max_usw": best_usw}
    print(json.dumps(result, indent=2))
    if ys_sorted != leximin or flow_usw != best_usw or sum(ys_sorted) != best_usw:
        raise InvariantError("Oracle mismatch: mechanism output differs from exhaustive search")


def cmd_compare(args) -> None:
    config = _config(args)
    item_types, respondents, synthesize = _inputs(config)
    seeds = [args.seed + t for t in range(args.seeds)]
    metrics, histogram, paths = compare_mechanisms(config, item_types, respondents, args.mechanisms, seeds, synthesize)
    write_table(metrics, args.out / "metrics.csv")
    write_table(histogram, args.out / "histogram.csv")
    write_table(paths, args.out / "path_lengths.csv")
    summary = metrics.drop(columns=["seed"]).groupby("mechanism", sort=False).mean()
    print(summary.round(3).to_string())


def cmd_sweep(args) -> None:
    config = _config(args)
    item_types, respondents, synthesize = _inputs(config)
    seeds = [args.seed + t for t in range(args.seeds)]
    if args.kind == "runtime":
        cohorts = args.cohorts or list(constants.SWEEP_COHORTS)
        df = runtime_sweep(config, item_types, respondents, cohorts, args.mechanisms or ("sd", "rr", "ys"), seeds, synthesize)
        write_table(df, args.out / "runtime.csv")
        print(df.groupby(["cohort", "mechanism"])["seconds"].mean().round(3).to_string())
    else:
        if not args.cohorts:
            raise InputError("The stress sweep needs --cohorts")
        stress, trend = stress_sweep(config, item_types, respondents, args.cohorts, args.mechanisms or ("sd", "ys"), seeds, synthesize)
        write_table(stress, args.out / "stress.csv")
        write_table(trend, args.out / "stress_trend.csv")
        print(trend.to_string(index=False))


def cmd_approvals(args) -> None:
    item_types = load_schedule(args.schedule)
    respondents = effective_respondents(load_responses(args.responses, item_types, args.columns))
    seeds = [args.seed + t for t in range(args.seeds)]
    bands = synthetic_approval_bands(respondents, item_types, args.k, args.ell, seeds)
    write_table(bands, args.out / "approvals.csv")
    print(bands.groupby("status", sort=False)["abs_error"].mean().round(4).to_string())


def cmd_check(args) -> None:
    schedule = read_schedule_frame(args.schedule)
    responses = read_responses_frame(args.responses, args.columns)
    for name, df in quality_report(schedule, responses).items():
        write_table(df, args.out / f"quality_{name}.csv")
        print(f"== {name}: {len(df)} rows")
        if not df.empty:
            print(df.head(20).to_string(index=False))


def cmd_slots(args) -> None:
    df = assign_slots(read_schedule_frame(args.schedule), args.meeting_column)
    write_table(df, args.out)
    print(f"-> {df['slot'].nunique()} slots over {len(df)} courses written to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="alloc", description="Fair course allocation with multi-copy items.")
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("-q", "--quiet", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one mechanism and write report.json and allocation.csv")
    _add_instance_args(p)
    p.add_argument("--mechanism", choices=MECHANISMS, default="ys")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.add_argument("--no-timing", action="store_true", help="omit wall-clock time so reports are byte-stable")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("synth", help="generate synthetic respondents of one status")
    _add_data_args(p)
    p.add_argument("--status", required=True)
    p.add_argument("--count", type=int, required=True)
    p.add_argument("--ell", type=int, default=constants.DEFAULT_ELL)
    p.add_argument("--seed", type=int, default=constants.RANDOM_SEED)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("oracle", help="compare Yankee Swap and max flow against exhaustive search")
    _add_instance_args(p)
    p.add_argument("--max-states", type=int, default=constants.MAX_ORACLE_STATES)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("compare", help="metrics of several mechanisms over several seeds")
    _add_instance_args(p)
    p.add_argument("--mechanisms", nargs="+", choices=RUNNABLE, default=list(RUNNABLE))
    p.add_argument("--seeds", type=int, default=1, help="number of consecutive seeds starting at --seed")
    p.add_argument("--out", type=Path, default=Path("out"))
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("sweep", help="runtime or stress sweep over cohort sizes")
    _add_instance_args(p)
    p.add_argument("--kind", choices=("runtime", "stress"), default="runtime")
    p.add_argument("--cohorts", type=int, nargs="+", default=None)
    p.add_argument("--mechanisms", nargs="+", choices=RUNNABLE, default=None)
    p.add_argument("--seeds", type=int, default=1)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("approvals", help="approval shares of respondents vs synthetic cohorts")
    _add_data_args(p)
    p.add_argument("--k", type=int, default=constants.DEFAULT_K)
    p.add_argument("--ell", type=int, default=constants.DEFAULT_ELL)
    p.add_argument("--seed", type=int, default=constants.RANDOM_SEED)
    p.add_argument("--seeds", type=int, default=20)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.set_defaults(func=cmd_approvals)

    p = sub.add_parser("check", help="data-quality tables for the input files")
    _add_data_args(p)
    p.add_argument("--out", type=Path, default=Path("out"))
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("slots", help="assign slot ids to a raw schedule by meeting pattern")
    p.add_argument("--schedule", type=Path, required=True)
    p.add_argument("--meeting-column", required=True)
    p.add_argument("--out", type=Path, required=True)
    p.set_defaults(func=cmd_slots)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    logging.basicConfig(level=level, format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        args.func(args)
    except InputError as e:
        logger.error("%s", e)
        return constants.EXIT_INPUT_ERROR
    except InvariantError as e:
        logger.error("Internal invariant violated: %s", e)
        return constants.EXIT_INVARIANT_ERROR
    return constants.EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
