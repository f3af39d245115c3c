"""Cleaning of survey data and construction of allocation instances."""
from __future__ import annotations

import dataclasses
import logging
import math
from typing import Callable, Mapping, Optional, Sequence

import numpy as np
import pandas as pd

import constants
from utils.config import RunConfig
from utils.core import Agent, InputError, Instance, ItemType
from utils.valuation import StructuredValuation

logger = logging.getLogger(__name__)

STATUS_ALIASES = {s.lower(): s for s in constants.STATUSES}
STATUS_ALIASES.update({"freshmen": "Freshman", "masters": "MS", "doctoral": "PhD"})

SCHEDULE_COLUMNS = ["catalog", "section", "slot", "capacity"]
RESPONSE_ID_COLUMNS = ["student_id", "status", "course_max"]
RATING_PREFIX = "rating_"

Synthesizer = Callable[[str, int], list[Agent]]


def normalize_status(label) -> str:
    key = str(label).strip().lower()
    if key in STATUS_ALIASES:
        return STATUS_ALIASES[key]
    if key.endswith("s") and key[:-1] in STATUS_ALIASES:
        return STATUS_ALIASES[key[:-1]]
    raise InputError(f"Unknown academic status {label!r}")


def _int_cell(value, what: str, where: str) -> int:
    try:
        f = float(value)
    except (TypeError, ValueError):
        raise InputError(f"{where}: {what} {value!r} is not an integer") from None
    if not math.isfinite(f) or f != int(f):
        raise InputError(f"{where}: {what} {value!r} is not an integer")
    return int(f)


def schedule_to_item_types(df: pd.DataFrame, source: str = "schedule") -> list[ItemType]:
    missing = [c for c in SCHEDULE_COLUMNS if c not in df.columns]
    if missing:
        raise InputError(f"{source}: missing columns {missing}")
    items, seen = [], {}
    for idx, row in enumerate(df.itertuples(index=False)):
        where = f"{source}:{idx + 2}"
        catalog, section = str(row.catalog).strip(), str(row.section).strip()
        if not catalog or not section:
            raise InputError(f"{where}: empty catalog or section")
        key = (catalog, section)
        if key in seen:
            raise InputError(f"{where}: duplicate course {catalog} section {section} (first at line {seen[key]})")
        seen[key] = idx + 2
        capacity = _int_cell(row.capacity, "capacity", where)
        if capacity < 1:
            raise InputError(f"{where}: capacity {capacity} must be positive")
        items.append(ItemType(len(items), catalog, section, _int_cell(row.slot, "slot", where), capacity))
    if not items:
        raise InputError(f"{source}: schedule has no courses")
    return items


def responses_to_agents(df: pd.DataFrame, item_types: Sequence[ItemType], source: str = "responses") -> list[Agent]:
    """Validated agents; absent or empty rating cells default to 1 and course_max is capped by status."""
    missing = [c for c in RESPONSE_ID_COLUMNS if c not in df.columns]
    if missing:
        raise InputError(f"{source}: missing columns {missing}")
    rating_cols = {f"{RATING_PREFIX}{it.label}": it.id for it in item_types}
    unknown = [c for c in df.columns if c.startswith(RATING_PREFIX) and c not in rating_cols]
    if unknown:
        logger.warning("%s: ignoring %d rating columns with no matching course (e.g. %s)", source, len(unknown), unknown[0])
    present = [(c, g) for c, g in rating_cols.items() if c in df.columns]

    agents = []
    for idx, row in enumerate(df.to_dict("records")):
        where = f"{source}:{idx + 2}"
        try:
            status = normalize_status(row["status"])
        except InputError as e:
            raise InputError(f"{where}: {e}") from None
        ratings = [constants.MIN_RATING] * len(item_types)
        for col, g in present:
            cell = row[col]
            if pd.isna(cell) or str(cell).strip() == "":
                continue
            r = _int_cell(cell, f"rating for {col[len(RATING_PREFIX):]}", where)
            if not constants.MIN_RATING <= r <= constants.MAX_RATING:
                raise InputError(f"{where}: rating {r} for {col[len(RATING_PREFIX):]} outside {constants.MIN_RATING}..{constants.MAX_RATING}")
            ratings[g] = r
        cap = constants.COURSE_CAP[status]
        if pd.isna(row["course_max"]) or str(row["course_max"]).strip() == "":
            course_max = cap
        else:
            course_max = _int_cell(row["course_max"], "course_max", where)
            if course_max < 1:
                raise InputError(f"{where}: course_max {course_max} must be positive")
        agents.append(Agent(len(agents), str(row["student_id"]), status, tuple(ratings), min(course_max, cap)))
    logger.info("%s: %d respondents over %d courses", source, len(agents), len(item_types))
    return agents


def agents_to_frame(agents: Sequence[Agent], item_types: Sequence[ItemType]) -> pd.DataFrame:
    data = {
        "student_id": [a.student_id for a in agents],
        "status": [a.status for a in agents],
        "course_max": [a.course_max for a in agents],
    }
    ratings = np.array([a.ratings for a in agents], dtype=np.int64).reshape(len(agents), len(item_types))
    for it in item_types:
        data[f"{RATING_PREFIX}{it.label}"] = ratings[:, it.id]
    return pd.DataFrame(data)


def effective_respondents(agents: Sequence[Agent]) -> list[Agent]:
    """Respondents with at least one rating above the default."""
    return [a for a in agents if max(a.ratings, default=constants.MIN_RATING) > constants.MIN_RATING]


def topk_approvals(ratings: Sequence[int], k: int = constants.DEFAULT_K) -> frozenset[int]:
    """Approve every course rated at least the k-th highest rating, never the default rating."""
    if k < 1:
        raise InputError(f"k must be >= 1, got {k}")
    if not ratings:
        return frozenset()
    ordered = sorted(ratings, reverse=True)
    threshold = ordered[min(k, len(ordered)) - 1]
    return frozenset(g for g, r in enumerate(ratings) if r >= threshold and r > constants.MIN_RATING)


def build_valuations(agents: Sequence[Agent], item_types: Sequence[ItemType], k: int) -> list[StructuredValuation]:
    slot_of = [it.slot for it in item_types]
    return [StructuredValuation(topk_approvals(a.ratings, k), slot_of, a.course_max) for a in agents]


def scale_capacities(item_types: Sequence[ItemType], fraction: float) -> list[ItemType]:
    """Multiply every capacity by ``fraction``, rounding half up and keeping at least one seat."""
    return [dataclasses.replace(it, capacity=max(1, math.floor(it.capacity * fraction + 0.5))) for it in item_types]


def apportion(total: int, weights: Mapping[str, float]) -> dict[str, int]:
    """Largest-remainder split of ``total`` proportional to ``weights``; ties go to earlier keys."""
    keys = list(weights)
    w = np.array([weights[k] for k in keys], dtype=float)
    exact = total * w / w.sum()
    counts = np.floor(exact).astype(int)
    order = sorted(range(len(keys)), key=lambda t: (-(exact[t] - counts[t]), t))
    for t in order[: total - counts.sum()]:
        counts[t] += 1
    return {k: int(c) for k, c in zip(keys, counts)}


def reduced_targets(rate: float = constants.MIN_RESPONSE_RATE) -> dict[str, int]:
    return {s: math.floor(constants.POPULATION[s] * rate + 0.5) for s in constants.STATUSES}


def by_status(agents: Sequence[Agent]) -> dict[str, list[Agent]]:
    groups: dict[str, list[Agent]] = {s: [] for s in constants.STATUSES}
    for a in agents:
        groups[a.status].append(a)
    return groups


def fill_cohort(
    respondents: Sequence[Agent],
    targets: Mapping[str, int],
    rng: np.random.Generator,
    synthesize: Optional[Synthesizer] = None,
) -> list[Agent]:
    """Per status: subsample respondents down to the target, or top up with synthetic students."""
    groups = by_status(respondents)
    out: list[Agent] = []
    for status in constants.STATUSES:
        have, want = groups[status], targets.get(status, 0)
        if want <= len(have):
            keep = np.sort(rng.choice(len(have), size=want, replace=False))
            out.extend(have[t] for t in keep)
            continue
        if synthesize is None:
            raise InputError(f"Only {len(have)} {status} respondents for a target of {want}")
        if not have:
            raise InputError(f"No {status} respondents to generate synthetic students from")
        out.extend(have)
        out.extend(synthesize(status, want - len(have)))
    return [dataclasses.replace(a, id=t) for t, a in enumerate(out)]


def build_instance(
    config: RunConfig,
    item_types: Sequence[ItemType],
    respondents: Sequence[Agent],
    synthesize: Optional[Synthesizer] = None,
) -> Instance:
    rng = np.random.default_rng(config.seed)
    if config.mode == "real":
        items = scale_capacities(item_types, config.scale) if config.scale != 1 else list(item_types)
        agents = [dataclasses.replace(a, id=t) for t, a in enumerate(respondents)]
    elif config.mode == "reduced":
        items = scale_capacities(item_types, constants.MIN_RESPONSE_RATE)
        agents = fill_cohort(respondents, reduced_targets(), rng)
    elif config.mode == "full" and config.cohort is None:
        items = list(item_types)
        agents = fill_cohort(respondents, constants.POPULATION, rng, synthesize)
    elif config.mode == "full":
        full_size = sum(constants.POPULATION.values())
        items = scale_capacities(item_types, config.cohort / full_size)
        agents = fill_cohort(respondents, apportion(config.cohort, constants.POPULATION), rng, synthesize)
    else:
        items = list(item_types)
        agents = fill_cohort(respondents, apportion(config.cohort, constants.POPULATION), rng, synthesize)
    valuations = build_valuations(agents, items, config.k)
    instance = Instance(tuple(items), tuple(agents), tuple(valuations))
    logger.info("Built %s instance: %d agents, %d courses, %d seats", config.mode, instance.n, instance.m, instance.q_total)
    return instance


def assign_slots(df: pd.DataFrame, meeting_column: str) -> pd.DataFrame:
    """Dense slot ids by exact equality of the trimmed meeting pattern, in order of first appearance."""
    if meeting_column not in df.columns:
        raise InputError(f"Column {meeting_column!r} not found; available: {list(df.columns)}")
    out = df.copy()
    out["slot"], _ = pd.factorize(out[meeting_column].astype(str).str.strip())
    return out
