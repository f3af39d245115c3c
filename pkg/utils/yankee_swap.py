"""Yankee Swap with item multiplicity.

The exchange graph lives on item types: an edge (g, h) exists while some agent
holding g could swap it for h without losing value. ``responsible`` keeps, per
edge, the agents justifying it, so each augmentation only re-evaluates the
agents it touched.
"""
from __future__ import annotations

import heapq
import logging
import time
from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import networkx as nx
import numpy as np
import numpy.typing as npt

import constants
from utils.baselines import PickOrder, pick_order
from utils.core import POOL_ROW, Allocation, Instance, InvariantError
from utils.valuation import Valuation

logger = logging.getLogger(__name__)

Edge = tuple[int, int]
Path = tuple[int, ...]


@dataclass
class PathStats:
    histogram: Counter = field(default_factory=Counter)
    iterations: int = 0

    def record(self, length: int) -> None:
        self.histogram[length] += 1
        self.iterations += 1

    @property
    def removals(self) -> int:
        return self.histogram.get(0, 0)

    @property
    def p_max(self) -> int:
        return max(self.histogram, default=0)

    def to_dict(self) -> dict[str, int]:
        return {str(k): int(self.histogram[k]) for k in sorted(self.histogram)}


def _edge_candidates(val: Valuation, bundle: npt.NDArray[np.int64]) -> list[Edge]:
    """Edges a single agent justifies for its current bundle."""
    out = []
    held = np.flatnonzero(bundle)
    for g in held:
        g = int(g)
        for h in val.approved:
            if h == g or bundle[h] > 0:
                continue
            if val.exchangeable(bundle, g, h):
                out.append((g, h))
    return out


def rebuild_exchange(alloc: Allocation, valuations: Sequence[Valuation]) -> tuple[nx.DiGraph, dict[Edge, set[int]]]:
    """Exchange graph and responsible-agent sets computed from the allocation alone."""
    responsible: dict[Edge, set[int]] = {}
    for j, val in enumerate(valuations):
        for edge in _edge_candidates(val, alloc.bundle(j)):
            responsible.setdefault(edge, set()).add(j)
    graph = nx.DiGraph()
    graph.add_nodes_from(range(alloc.m))
    graph.add_edges_from(responsible)
    return graph, responsible


class ExchangeState:
    def __init__(self, instance: Instance, order: PickOrder, alloc: Optional[Allocation] = None):
        self.valuations = instance.valuations
        self.alloc = alloc if alloc is not None else instance.new_allocation()
        self.graph, self.responsible = rebuild_exchange(self.alloc, self.valuations)
        self._agent_edges: dict[int, set[Edge]] = {}
        for edge, agents in self.responsible.items():
            for j in agents:
                self._agent_edges.setdefault(j, set()).add(edge)
        self.utilities = self.alloc.utilities(self.valuations)
        self.rank = order.ranks()
        self.playing: set[int] = set(range(instance.n))
        self._heap = [(int(self.utilities[a]), int(self.rank[a]), a) for a in self.playing]
        heapq.heapify(self._heap)

    # Responsible-set bookkeeping

    def _add(self, edge: Edge, j: int) -> None:
        agents = self.responsible.get(edge)
        if agents is None:
            agents = self.responsible[edge] = set()
            self.graph.add_edge(*edge)
        agents.add(j)
        self._agent_edges.setdefault(j, set()).add(edge)

    def _discard(self, edge: Edge, j: int) -> None:
        agents = self.responsible.get(edge)
        if agents is None or j not in agents:
            return
        agents.discard(j)
        self._agent_edges[j].discard(edge)
        if not agents:
            del self.responsible[edge]
            self.graph.remove_edge(*edge)

    def forget_type(self, j: int, g: int) -> None:
        """Drop j from every R(g, h) once j no longer holds g."""
        for edge in [e for e in self._agent_edges.get(j, ()) if e[0] == g]:
            self._discard(edge, j)

    def reevaluate(self, j: int) -> None:
        wanted = set(_edge_candidates(self.valuations[j], self.alloc.bundle(j)))
        current = self._agent_edges.get(j, set())
        for edge in current - wanted:
            self._discard(edge, j)
        for edge in wanted - current:
            self._add(edge, j)

    # Game bookkeeping

    def remove_agent(self, i: int) -> None:
        self.playing.discard(i)

    def bump(self, i: int) -> None:
        self.utilities[i] += 1
        heapq.heappush(self._heap, (int(self.utilities[i]), int(self.rank[i]), i))

    def peek_poorest(self) -> int:
        while self._heap:
            u, _, a = self._heap[0]
            if a in self.playing and u == self.utilities[a]:
                return a
            heapq.heappop(self._heap)
        raise InvariantError("No playing agents left to select")


def select_poorest(state: ExchangeState) -> int:
    """Playing agent of minimum utility; ties go to the earlier agent in the pick order."""
    return state.peek_poorest()


def find_transfer_path(state: ExchangeState, i: int) -> Optional[Path]:
    """Shortest path from a type i gains from to a type with a free seat.

    Breadth-first search with sorted sources and sorted successors, so among
    shortest paths the lexicographically smallest node sequence wins.
    """
    bundle = state.alloc.bundle(i)
    sources = sorted(g for g in state.valuations[i].marginal_gain_set(bundle) if bundle[g] == 0)
    if not sources:
        return None
    pool = state.alloc.pool
    for g in sources:
        if pool[g] > 0:
            return (g,)
    parent: dict[int, Optional[int]] = {g: None for g in sources}
    queue = deque(sources)
    while queue:
        g = queue.popleft()
        if pool[g] > 0:
            path = [g]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return tuple(reversed(path))
        for h in sorted(state.graph.successors(g)):
            if h not in parent:
                parent[h] = g
                queue.append(h)
    return None


def augment(state: ExchangeState, i: int, path: Path) -> ExchangeState:
    alloc = state.alloc
    bundle = alloc.bundle(i)
    g0 = path[0]
    if bundle[g0] > 0 or state.valuations[i].marginal(bundle, g0) != 1:
        raise InvariantError(f"Stale path: agent {i} gains nothing from item {g0}")
    if alloc.pool[path[-1]] < 1:
        raise InvariantError(f"Stale path: item {path[-1]} has no free seat")
    chain = []
    for g, h in zip(path, path[1:]):
        agents = state.responsible.get((g, h))
        if not agents:
            raise InvariantError(f"Stale path: no agent can exchange {g} for {h}")
        chain.append(min(agents))

    # Phase 1: i takes g0, each responsible agent passes on its type and takes the next one
    receiver = i
    for k, j in enumerate(chain):
        alloc.transfer(alloc.agent_row(j), alloc.agent_row(receiver), path[k])
        state.forget_type(j, path[k])
        receiver = j
    alloc.transfer(POOL_ROW, alloc.agent_row(receiver), path[-1])

    # Phase 2: touched agents re-evaluate their held types against their approved types
    for j in dict.fromkeys([i, *chain]):
        state.reevaluate(j)
    state.bump(i)
    return state


def audit(state: ExchangeState) -> None:
    """Compare the incremental state against a full rebuild; raise on any mismatch."""
    state.alloc.check()
    _, responsible = rebuild_exchange(state.alloc, state.valuations)
    if responsible != state.responsible:
        raise InvariantError("Incremental responsible sets diverged from a full rebuild")
    if set(state.graph.edges) != set(responsible):
        raise InvariantError("Exchange graph edges diverged from the responsible sets")
    if not np.array_equal(state.utilities, state.alloc.utilities(state.valuations)):
        raise InvariantError("Cached utilities diverged from recomputed values")


def run_yankee_swap(
    instance: Instance,
    order: Optional[PickOrder] = None,
    seed: int = constants.RANDOM_SEED,
    check: bool = False,
) -> tuple[Allocation, PathStats]:
    start = time.perf_counter()
    if order is None:
        order = pick_order(instance.agents, seed)
    state = ExchangeState(instance, order)
    stats = PathStats()
    bound = instance.q_total + instance.n
    while state.playing:
        i = select_poorest(state)
        path = find_transfer_path(state, i)
        if path is None:
            state.remove_agent(i)
            stats.record(0)
        else:
            augment(state, i, path)
            stats.record(len(path))
        if check:
            audit(state)
        if stats.iterations > bound:
            raise InvariantError(f"Yankee Swap exceeded {bound} iterations")
        if stats.iterations % 1000 == 0:
            logger.debug("Yankee Swap: %d iterations, %d agents still playing", stats.iterations, len(state.playing))
    logger.info(
        "Yankee Swap: %d agents, %d seats, %d iterations, longest path %d, %.2fs",
        instance.n, instance.q_total, stats.iterations, stats.p_max, time.perf_counter() - start,
    )
    return state.alloc, stats
