"""Baseline mechanisms and exhaustive oracles.

Serial dictatorship and round robin follow a status-then-random pick order. The
welfare optimum for structured valuations is an integral max flow; general
linear-constraint instances are exported as a 0/1 program instead of solved.
"""
from __future__ import annotations

import logging
import textwrap
import time
from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import Iterator, Optional, Sequence

import networkx as nx
import numpy as np
import numpy.typing as npt

import constants
from utils.core import POOL_ROW, Agent, Allocation, InputError, Instance
from utils.valuation import StructuredValuation

logger = logging.getLogger(__name__)


class InstanceTooLarge(InputError):
    """The brute-force search space exceeds the configured state guard."""


@dataclass(frozen=True)
class PickOrder:
    agents: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.agents) != list(range(len(self.agents))):
            raise InputError("Pick order must be a permutation of the agent ids")

    def __iter__(self) -> Iterator[int]:
        return iter(self.agents)

    def __len__(self) -> int:
        return len(self.agents)

    def ranks(self) -> npt.NDArray[np.int64]:
        """Position of each agent in the order."""
        r = np.empty(len(self.agents), dtype=np.int64)
        r[list(self.agents)] = np.arange(len(self.agents))
        return r


def pick_order(agents: Sequence[Agent], seed: int = constants.RANDOM_SEED) -> PickOrder:
    """Higher academic status first, seeded random order within a status."""
    rng = np.random.default_rng(seed)
    shuffle_key = rng.permutation(len(agents))
    priority = np.array([a.priority for a in agents], dtype=np.int64)
    return PickOrder(tuple(int(a) for a in np.lexsort((shuffle_key, priority))))


def _resolve(instance: Instance, order: Optional[PickOrder], seed: int) -> PickOrder:
    return order if order is not None else pick_order(instance.agents, seed)


def serial_dictatorship(instance: Instance, order: Optional[PickOrder] = None, seed: int = constants.RANDOM_SEED) -> Allocation:
    start = time.perf_counter()
    alloc = instance.new_allocation()
    for a in _resolve(instance, order, seed):
        chosen = instance.valuations[a].best_bundle(alloc.pool, instance.agents[a].ratings)
        for g in chosen:
            alloc.transfer(POOL_ROW, alloc.agent_row(a), g)
    logger.info("Serial dictatorship: %d agents, %d seats, %.2fs", instance.n, instance.q_total, time.perf_counter() - start)
    return alloc


def round_robin(instance: Instance, order: Optional[PickOrder] = None, seed: int = constants.RANDOM_SEED) -> Allocation:
    start = time.perf_counter()
    alloc = instance.new_allocation()
    agents = list(_resolve(instance, order, seed))
    rounds = 0
    while True:
        rounds += 1
        assigned = False
        still_active = []
        for a in agents:
            bundle = alloc.bundle(a)
            ratings = instance.agents[a].ratings
            options = [g for g in instance.valuations[a].marginal_gain_set(bundle) if alloc.pool[g] > 0 and bundle[g] == 0]
            if not options:
                # Seats only disappear, so an agent with nothing to pick never picks again
                continue
            g = min(options, key=lambda x: (-ratings[x], x))
            alloc.transfer(POOL_ROW, alloc.agent_row(a), g)
            assigned = True
            still_active.append(a)
        agents = still_active
        if not assigned:
            break
    logger.info("Round robin: %d agents, %d rounds, %.2fs", instance.n, rounds, time.perf_counter() - start)
    return alloc


def _flow_network(instance: Instance) -> nx.DiGraph:
    G = nx.DiGraph()
    G.add_node("s")
    for a, val in enumerate(instance.valuations):
        if not isinstance(val, StructuredValuation):
            raise InputError("The flow optimum needs structured valuations; export the program instead")
        if not val.approved:
            continue
        G.add_edge("s", ("agent", a), capacity=val.course_max)
        for g in sorted(val.approved):
            slot = val.slot_of[g]
            G.add_edge(("agent", a), ("slot", a, slot), capacity=1)
            G.add_edge(("slot", a, slot), ("item", g), capacity=1)
    for g, q in enumerate(instance.capacities):
        G.add_edge(("item", g), "t", capacity=int(q))
    return G


def max_usw_flow(instance: Instance) -> Allocation:
    """Utilitarian optimum for structured valuations via an integral maximum flow."""
    start = time.perf_counter()
    alloc = instance.new_allocation()
    G = _flow_network(instance)
    value, flow = nx.maximum_flow(G, "s", "t")
    for node, out in flow.items():
        if not (isinstance(node, tuple) and node[0] == "slot"):
            continue
        a = node[1]
        for (_, g), f in out.items():
            if f > 0:
                alloc.transfer(POOL_ROW, alloc.agent_row(a), g)
    logger.info("Max-flow USW: value %d, %.2fs", value, time.perf_counter() - start)
    return alloc


def _lp_expr(terms: Sequence[tuple[int, str]]) -> str:
    parts = []
    for coef, var in terms:
        sign = "-" if coef < 0 else "+"
        mag = abs(coef)
        body = var if mag == 1 else f"{mag} {var}"
        parts.append(f"{sign} {body}" if parts or coef < 0 else body)
    return " ".join(parts)


def _lp_line(name: str, expr: str) -> list[str]:
    return textwrap.wrap(f"{name}: {expr}", width=200, initial_indent=" ", subsequent_indent="   ", break_on_hyphens=False)


def export_ilp(instance: Instance, path: str | Path) -> Path:
    """Write the utilitarian 0/1 program in CPLEX LP text format."""
    lines = ["\\ Utilitarian welfare program", "Maximize"]
    variables = [f"x_{i}_{g}" for i in range(instance.n) for g in range(instance.m)]
    lines += _lp_line("obj", _lp_expr([(1, v) for v in variables]) if variables else "0")
    lines.append("Subject To")
    for i, val in enumerate(instance.valuations):
        Z, b = val.constraint_system()
        for r, (row, limit) in enumerate(zip(Z, b)):
            terms = [(int(c), f"x_{i}_{g}") for g, c in enumerate(row) if c != 0]
            if terms:
                lines += _lp_line(f"a{i}_r{r}", f"{_lp_expr(terms)} <= {int(limit)}")
    if instance.n:
        for g, q in enumerate(instance.capacities):
            terms = [(1, f"x_{i}_{g}") for i in range(instance.n)]
            lines += _lp_line(f"cap_{g}", f"{_lp_expr(terms)} <= {int(q)}")
    if variables:
        lines.append("Binary")
        lines += textwrap.wrap(" ".join(variables), width=200, initial_indent=" ", subsequent_indent=" ")
    lines.append("End")
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    except OSError as e:
        raise InputError(f"Cannot write program file {path}: {e}") from e
    logger.info("Wrote 0/1 program with %d variables to %s", len(variables), path)
    return path


def _clean_options(instance: Instance) -> list[list[tuple[int, ...]]]:
    """Per agent, every clean single-seat bundle as a tuple of item ids (empty first)."""
    options = []
    for val in instance.valuations:
        approved = sorted(val.approved)
        opts: list[tuple[int, ...]] = [()]
        for size in range(1, min(val.course_max, len(approved)) + 1):
            for combo in combinations(approved, size):
                T = np.zeros(instance.m, dtype=np.int64)
                T[list(combo)] = 1
                if val.value(T) == size:
                    opts.append(combo)
        options.append(opts)
    return options


def _enumerate(instance: Instance, max_states: int) -> Iterator[tuple[int, ...]]:
    """Yield the utility vector of every allocation of clean bundles within capacities."""
    options = _clean_options(instance)
    remaining = instance.capacities.copy()
    utilities = [0] * instance.n
    visited = 0

    def dfs(a: int) -> Iterator[tuple[int, ...]]:
        nonlocal visited
        visited += 1
        if visited > max_states:
            raise InstanceTooLarge(f"Brute-force search exceeded {max_states} states")
        if a == instance.n:
            yield tuple(utilities)
            return
        for combo in options[a]:
            if any(remaining[g] < 1 for g in combo):
                continue
            for g in combo:
                remaining[g] -= 1
            utilities[a] = len(combo)
            yield from dfs(a + 1)
            for g in combo:
                remaining[g] += 1
        utilities[a] = 0

    yield from dfs(0)


def brute_force_leximin(instance: Instance, max_states: int = constants.MAX_ORACLE_STATES) -> tuple[int, ...]:
    """Leximin-maximal sorted utility vector over all valid clean allocations."""
    return max(tuple(sorted(u)) for u in _enumerate(instance, max_states))


def brute_force_max_usw(instance: Instance, max_states: int = constants.MAX_ORACLE_STATES) -> int:
    return max(sum(u) for u in _enumerate(instance, max_states))
