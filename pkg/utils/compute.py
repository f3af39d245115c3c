"""Experiment orchestration: single runs, multi-seed comparisons and sweeps."""
from __future__ import annotations

import dataclasses
import hashlib
import logging
import time
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
import pandas as pd
import statsmodels.api as sm

import constants
from utils.baselines import export_ilp, max_usw_flow, pick_order, round_robin, serial_dictatorship
from utils.config import RunConfig
from utils.core import Agent, Allocation, InputError, Instance, ItemType
from utils.io import load_responses, load_schedule, maybe_read_parquet, write_allocation, write_parquet, write_report
from utils.metrics import evaluate, nsw, usw
from utils.prep import (
    Synthesizer,
    agents_to_frame,
    build_instance,
    by_status,
    effective_respondents,
    responses_to_agents,
    topk_approvals,
)
from utils.synthgen import StatusPopulation, fit_population, sample_population
from utils.yankee_swap import PathStats, run_yankee_swap

logger = logging.getLogger(__name__)

RUNNABLE = ("sd", "rr", "ys", "usw-flow")


def instance_params(instance: Instance) -> dict:
    return {
        "n": instance.n,
        "m": instance.m,
        "q_total": instance.q_total,
        "q_max": instance.q_max,
        "c_max": instance.c_max,
        "d_max": instance.d_max,
    }


def run_mechanism(
    instance: Instance, mechanism: str, seed: int, check: bool = False
) -> tuple[Allocation, Optional[PathStats], float]:
    order = pick_order(instance.agents, seed)
    start = time.perf_counter()
    stats = None
    if mechanism == "sd":
        alloc = serial_dictatorship(instance, order)
    elif mechanism == "rr":
        alloc = round_robin(instance, order)
    elif mechanism == "ys":
        alloc, stats = run_yankee_swap(instance, order, check=check)
    elif mechanism == "usw-flow":
        alloc = max_usw_flow(instance)
    else:
        raise InputError(f"Mechanism {mechanism!r} does not produce an allocation")
    return alloc, stats, time.perf_counter() - start


# Synthetic students

def _fingerprint(agents: Sequence[Agent]) -> str:
    h = hashlib.sha1()
    for a in agents:
        h.update(f"{a.student_id}:{a.course_max}:{a.ratings}".encode())
    return h.hexdigest()[:10]


def synthetic_cohort(
    respondents: Sequence[Agent],
    item_types: Sequence[ItemType],
    status: str,
    count: int,
    ell: int,
    seed: int,
    cache_dir: Optional[str | Path] = None,
    population: Optional[StatusPopulation] = None,
) -> list[Agent]:
    """``count`` synthetic students of ``status``, cached as parquet when ``cache_dir`` is set."""
    group = by_status(respondents)[status]
    cache = None
    if cache_dir is not None:
        cache = Path(cache_dir) / f"{status}_{count}_{ell}_{seed}_{_fingerprint(group)}.parquet"
        cached = maybe_read_parquet(cache)
        if cached is not None:
            logger.debug("Synthetic cohort cache hit: %s", cache.name)
            return responses_to_agents(cached, item_types, source=str(cache))
    rng = np.random.default_rng([seed, constants.STATUS_RANK[status], count])
    if population is None:
        population = fit_population(group, ell, rng)
    synth = sample_population(population, count, rng)
    if cache is not None:
        write_parquet(agents_to_frame(synth, item_types), cache)
    return synth


def make_synthesizer(
    respondents: Sequence[Agent],
    item_types: Sequence[ItemType],
    ell: int = constants.DEFAULT_ELL,
    seed: int = constants.RANDOM_SEED,
    cache_dir: Optional[str | Path] = None,
) -> Synthesizer:
    def synthesize(status: str, count: int) -> list[Agent]:
        return synthetic_cohort(respondents, item_types, status, count, ell, seed, cache_dir)

    return synthesize


# Single run

def run(config: RunConfig) -> dict:
    """Execute one configured run and write its report (and allocation or program file)."""
    start = time.perf_counter()
    item_types = load_schedule(config.schedule)
    loaded = load_responses(config.responses, item_types, config.columns)
    respondents = effective_respondents(loaded)
    if len(respondents) < len(loaded):
        logger.info("Dropped %d respondents with empty preferences", len(loaded) - len(respondents))
    synthesize = make_synthesizer(
        respondents, item_types, config.ell, config.seed, Path(config.responses).parent / constants.SYNTH_CACHE_DIRNAME
    )
    instance = build_instance(config, item_types, respondents, synthesize)
    out = Path(config.out)
    report: dict = {"config": config.to_dict(), "instance": instance_params(instance)}

    if config.mechanism == "export-ilp":
        report["ilp"] = export_ilp(instance, out / constants.ILP_FILENAME).name
    else:
        alloc, stats, _ = run_mechanism(instance, config.mechanism, config.seed, config.check)
        alloc.check()
        report["metrics"] = evaluate(alloc, instance).to_dict()
        if stats is not None:
            report["instance"]["p_max"] = stats.p_max
            report["iterations"] = stats.iterations
            report["path_lengths"] = stats.to_dict()
        write_allocation(alloc, instance, out / constants.ALLOCATION_FILENAME)
    if config.timing:
        report["wall_ms"] = round((time.perf_counter() - start) * 1000, 3)
    write_report(report, out / constants.REPORT_FILENAME)
    logger.info("Wrote %s", out / constants.REPORT_FILENAME)
    return report


# Multi-seed experiments

def path_length_table(stats: Sequence[PathStats]) -> pd.DataFrame:
    """Merged transfer-path histogram over several runs."""
    if not stats:
        return pd.DataFrame(columns=["length", "total", "mean_per_seed"])
    rows = [{"length": k, "count": v} for s in stats for k, v in s.histogram.items()]
    g = pd.DataFrame(rows).groupby("length")["count"].sum().reset_index(name="total")
    g["mean_per_seed"] = g["total"] / len(stats)
    return g.sort_values("length").reset_index(drop=True)


def compare_mechanisms(
    config: RunConfig,
    item_types: Sequence[ItemType],
    respondents: Sequence[Agent],
    mechanisms: Sequence[str] = RUNNABLE,
    seeds: Sequence[int] = (constants.RANDOM_SEED,),
    synthesize: Optional[Synthesizer] = None,
) -> tuple[pd.DataFrame, pd.DataFrame, pd.DataFrame]:
    """Metrics per (seed, mechanism), the averaged bundle-size histogram and the merged path profile.

    The instance is rebuilt for every seed, so reduced mode draws a fresh subsample each time.
    """
    rows, hist_rows, ys_stats = [], [], []
    for seed in seeds:
        instance = build_instance(dataclasses.replace(config, seed=seed), item_types, respondents, synthesize)
        for mech in mechanisms:
            alloc, stats, seconds = run_mechanism(instance, mech, seed, config.check)
            report = evaluate(alloc, instance).to_dict()
            hist = report.pop("bundle_histogram")
            rows.append({"seed": seed, "mechanism": mech, **report, "seconds": seconds})
            hist_rows += [{"seed": seed, "mechanism": mech, "size": int(k), "count": v} for k, v in hist.items()]
            if stats is not None:
                ys_stats.append(stats)
    metrics = pd.DataFrame(rows)
    histogram = pd.DataFrame(hist_rows, columns=["seed", "mechanism", "size", "count"])
    histogram = (
        histogram.groupby(["mechanism", "size"])["count"].sum().div(len(seeds)).reset_index(name="mean_count")
    )
    return metrics, histogram, path_length_table(ys_stats)


def runtime_sweep(
    config: RunConfig,
    item_types: Sequence[ItemType],
    respondents: Sequence[Agent],
    cohorts: Sequence[int] = constants.SWEEP_COHORTS,
    mechanisms: Sequence[str] = ("sd", "rr", "ys"),
    seeds: Sequence[int] = (constants.RANDOM_SEED,),
    synthesize: Optional[Synthesizer] = None,
) -> pd.DataFrame:
    """Wall-clock seconds per mechanism on scaled cohorts (capacities scaled with the cohort)."""
    rows = []
    for cohort in cohorts:
        for seed in seeds:
            cfg = dataclasses.replace(config, mode="full", cohort=int(cohort), seed=seed, scale=1.0)
            instance = build_instance(cfg, item_types, respondents, synthesize)
            for mech in mechanisms:
                _, _, seconds = run_mechanism(instance, mech, seed)
                rows.append({"cohort": int(cohort), "mechanism": mech, "seed": seed, "seconds": seconds})
                logger.info("Runtime sweep: cohort %d, %s, %.2fs", cohort, mech, seconds)
    return pd.DataFrame(rows, columns=["cohort", "mechanism", "seed", "seconds"])


def stress_trend(stress: pd.DataFrame) -> pd.DataFrame:
    """OLS fit of zero-utility counts against cohort size, per mechanism."""
    rows = []
    for mech, g in stress.groupby("mechanism", sort=False):
        means = g.groupby("cohort")["zero_count"].mean()
        if means.size < 2:
            rows.append({"mechanism": mech, "slope": np.nan, "intercept": np.nan, "r_squared": np.nan})
            continue
        fit = sm.OLS(means.to_numpy(dtype=float), sm.add_constant(means.index.to_numpy(dtype=float))).fit()
        r2 = float(fit.rsquared) if np.ptp(means.to_numpy()) > 0 else np.nan
        rows.append({"mechanism": mech, "slope": float(fit.params[1]), "intercept": float(fit.params[0]), "r_squared": r2})
    return pd.DataFrame(rows, columns=["mechanism", "slope", "intercept", "r_squared"])


def stress_sweep(
    config: RunConfig,
    item_types: Sequence[ItemType],
    respondents: Sequence[Agent],
    cohorts: Sequence[int],
    mechanisms: Sequence[str] = ("sd", "ys"),
    seeds: Sequence[int] = (constants.RANDOM_SEED,),
    synthesize: Optional[Synthesizer] = None,
) -> tuple[pd.DataFrame, pd.DataFrame]:
    """Welfare and zero-utility counts with real capacities and growing cohorts."""
    rows = []
    for cohort in cohorts:
        for seed in seeds:
            cfg = dataclasses.replace(config, mode="stress", cohort=int(cohort), seed=seed, scale=1.0)
            instance = build_instance(cfg, item_types, respondents, synthesize)
            for mech in mechanisms:
                alloc, _, seconds = run_mechanism(instance, mech, seed)
                _, pct = usw(alloc, instance.valuations)
                _, zeros = nsw(alloc, instance.valuations)
                rows.append({"cohort": int(cohort), "mechanism": mech, "seed": seed, "usw_pct": pct, "zero_count": zeros, "seconds": seconds})
    stress = pd.DataFrame(rows, columns=["cohort", "mechanism", "seed", "usw_pct", "zero_count", "seconds"])
    return stress, stress_trend(stress)


# Approval shares, real vs synthetic

def approval_shares(agents: Sequence[Agent], item_types: Sequence[ItemType], k: int = constants.DEFAULT_K) -> pd.DataFrame:
    """Share of each status's agents approving each course under top-k approval."""
    rows = []
    for status, group in by_status(agents).items():
        if not group:
            continue
        counts = np.zeros(len(item_types))
        for a in group:
            counts[list(topk_approvals(a.ratings, k))] += 1
        rows += [
            {"status": status, "course": it.label, "share": counts[it.id] / len(group), "agents": len(group)}
            for it in item_types
        ]
    return pd.DataFrame(rows, columns=["status", "course", "share", "agents"])


def synthetic_approval_bands(
    respondents: Sequence[Agent],
    item_types: Sequence[ItemType],
    k: int = constants.DEFAULT_K,
    ell: int = constants.DEFAULT_ELL,
    seeds: Sequence[int] = (constants.RANDOM_SEED,),
    cache_dir: Optional[str | Path] = None,
) -> pd.DataFrame:
    """Real approval share per (status, course) next to the spread of synthetic cohorts of equal size."""
    real = approval_shares(respondents, item_types, k).rename(columns={"share": "real_share"})
    groups = {s: g for s, g in by_status(respondents).items() if g}
    populations = {s: fit_population(g, ell, np.random.default_rng([constants.RANDOM_SEED, constants.STATUS_RANK[s]])) for s, g in groups.items()}
    synth_frames = []
    for seed in seeds:
        synth = []
        for s, g in groups.items():
            synth += synthetic_cohort(respondents, item_types, s, len(g), ell, seed, cache_dir, populations[s])
        synth_frames.append(approval_shares(synth, item_types, k).assign(seed=seed))
    synth = pd.concat(synth_frames, ignore_index=True)
    bands = synth.groupby(["status", "course"], sort=False)["share"].agg(synth_mean="mean", synth_min="min", synth_max="max").reset_index()
    out = real.drop(columns="agents").merge(bands, on=["status", "course"], how="left")
    out["abs_error"] = (out["real_share"] - out["synth_mean"]).abs()
    return out
