"""Shared fixtures: hand-built and random allocation instances, small survey datasets on disk."""
from pathlib import Path

import numpy as np
import pandas as pd
import pytest

import constants
from utils.core import Agent, Instance, ItemType
from utils.valuation import StructuredValuation


def build_structured(approvals, slots, capacities, course_max, statuses=None, ratings=None) -> Instance:
    m, n = len(slots), len(approvals)
    items = tuple(ItemType(g, f"C{g}", "01", int(slots[g]), int(capacities[g])) for g in range(m))
    statuses = statuses or ["Senior"] * n
    if ratings is None:
        ratings = [[5 if g in approvals[a] else 1 for g in range(m)] for a in range(n)]
    agents = tuple(
        Agent(a, f"s{a}", statuses[a], tuple(int(r) for r in ratings[a]), int(course_max[a])) for a in range(n)
    )
    valuations = tuple(StructuredValuation(approvals[a], slots, course_max[a]) for a in range(n))
    return Instance(items, agents, valuations)


def random_structured(seed, n=4, m=4, max_q=2, max_cmax=2, n_slots=None, p_approve=0.5) -> Instance:
    rng = np.random.default_rng(seed)
    slots = [int(s) for s in rng.integers(0, n_slots or m, size=m)]
    caps = [int(q) for q in rng.integers(1, max_q + 1, size=m)]
    approvals = [{g for g in range(m) if rng.random() < p_approve} for _ in range(n)]
    course_max = [int(c) for c in rng.integers(1, max_cmax + 1, size=n)]
    statuses = [constants.STATUSES[int(s)] for s in rng.integers(0, len(constants.STATUSES), size=n)]
    course_max = [min(c, constants.COURSE_CAP[s]) for c, s in zip(course_max, statuses)]
    ratings = [[int(rng.integers(2, 9)) if g in approvals[a] else 1 for g in range(m)] for a in range(n)]
    return build_structured(approvals, slots, caps, course_max, statuses, ratings)


@pytest.fixture
def make_instance():
    return build_structured


@pytest.fixture
def random_instance():
    return random_structured


@pytest.fixture
def steal_instance():
    """Agent 0 approves {g, h} and will hold g; agent 1 approves only g. One seat each."""
    return build_structured([{0, 1}, {0}], slots=[0, 1], capacities=[1, 1], course_max=[2, 2])


def write_survey(directory: Path, per_status=6, n_courses=8, n_slots=4, seed=0, capacity=(3, 8)):
    """Small schedule.csv and responses.csv with respondents of every status."""
    rng = np.random.default_rng(seed)
    directory.mkdir(parents=True, exist_ok=True)
    schedule = pd.DataFrame({
        "catalog": [f"CS{100 + g}" for g in range(n_courses)],
        "section": ["01"] * n_courses,
        "slot": rng.integers(0, n_slots, size=n_courses),
        "capacity": rng.integers(capacity[0], capacity[1] + 1, size=n_courses),
    })
    rows = []
    for status in constants.STATUSES:
        for t in range(per_status):
            ratings = np.where(rng.random(n_courses) < 0.5, rng.integers(2, 9, size=n_courses), 1)
            ratings[rng.integers(n_courses)] = 8
            row = {"student_id": f"{status[:2]}{t}", "status": status, "course_max": int(rng.integers(1, 7))}
            row.update({f"rating_CS{100 + g}_01": int(ratings[g]) for g in range(n_courses)})
            rows.append(row)
    schedule_path = directory / constants.SCHEDULE_FILENAME
    responses_path = directory / constants.RESPONSES_FILENAME
    schedule.to_csv(schedule_path, index=False)
    pd.DataFrame(rows).to_csv(responses_path, index=False)
    return schedule_path, responses_path


@pytest.fixture
def survey(tmp_path):
    return write_survey(tmp_path / "data")
