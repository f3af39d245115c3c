"""Domain types shared by every mechanism: item types, agents, bundles, allocations.

Bundles are plain numpy count vectors over item types. An allocation is an
(n+1) x m count matrix whose row 0 is the unassigned pool and whose row a+1
belongs to agent a.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Sequence

import numpy as np
import numpy.typing as npt

import constants

if TYPE_CHECKING:
    from utils.valuation import Valuation

Bundle = npt.NDArray[np.int64]

POOL_ROW = 0


class AllocationError(Exception):
    """Base class for every error raised by the allocation engine."""


class InputError(AllocationError):
    """Malformed input data or configuration."""


class InvariantError(AllocationError):
    """An internal invariant was violated."""


class TransferError(InvariantError):
    """A seat transfer would underflow or duplicate a seat."""


@dataclass(frozen=True)
class ItemType:
    id: int
    catalog_label: str
    section_label: str
    slot: int
    capacity: int

    def __post_init__(self):
        if self.capacity < 1:
            raise InputError(f"Item type {self.label} has capacity {self.capacity}; must be >= 1")

    @property
    def label(self) -> str:
        return f"{self.catalog_label}_{self.section_label}"


@dataclass(frozen=True)
class Agent:
    id: int
    student_id: str
    status: str
    ratings: tuple[int, ...]
    course_max: int

    def __post_init__(self):
        if self.status not in constants.STATUS_RANK:
            raise InputError(f"Unknown status {self.status!r} for student {self.student_id}")
        if not 1 <= self.course_max <= constants.UNDERGRAD_COURSE_CAP:
            raise InputError(f"course_max {self.course_max} out of range for student {self.student_id}")
        bad = [r for r in self.ratings if not constants.MIN_RATING <= r <= constants.MAX_RATING]
        if bad:
            raise InputError(f"Rating {bad[0]} out of range for student {self.student_id}")

    @property
    def priority(self) -> int:
        # Lower is served first
        return constants.STATUS_RANK[self.status]

    @property
    def is_graduate(self) -> bool:
        return self.status in constants.GRADUATE_STATUSES


def empty_bundle(m: int) -> Bundle:
    return np.zeros(m, dtype=np.int64)


def unit(m: int, g: int) -> Bundle:
    e = empty_bundle(m)
    e[g] = 1
    return e


def add_item(S: Bundle, g: int) -> Bundle:
    T = S.copy()
    T[g] += 1
    return T


def remove_item(S: Bundle, g: int) -> Bundle:
    if S[g] < 1:
        raise TransferError(f"Cannot remove item {g} from a bundle without a copy of it")
    T = S.copy()
    T[g] -= 1
    return T


def bundle_size(S: Bundle) -> int:
    return int(S.sum())


def bundle_leq(S: Bundle, T: Bundle) -> bool:
    """Componentwise order S <= T."""
    return bool(np.all(S <= T))


def capacity_vector(item_types: Sequence[ItemType]) -> npt.NDArray[np.int64]:
    return np.array([it.capacity for it in item_types], dtype=np.int64)


@dataclass
class Allocation:
    rows: npt.NDArray[np.int64]
    capacities: npt.NDArray[np.int64]
    single_seat: bool = True

    @property
    def n(self) -> int:
        return self.rows.shape[0] - 1

    @property
    def m(self) -> int:
        return self.rows.shape[1]

    @property
    def pool(self) -> npt.NDArray[np.int64]:
        return self.rows[POOL_ROW]

    @staticmethod
    def agent_row(agent: int) -> int:
        return agent + 1

    def bundle(self, agent: int) -> Bundle:
        return self.rows[agent + 1]

    def agent_rows(self) -> npt.NDArray[np.int64]:
        return self.rows[1:]

    def sizes(self) -> npt.NDArray[np.int64]:
        return self.rows[1:].sum(axis=1)

    def transfer(self, from_row: int, to_row: int, g: int) -> "Allocation":
        if from_row == to_row:
            raise TransferError(f"Transfer of item {g} from row {from_row} to itself")
        if self.rows[from_row, g] < 1:
            raise TransferError(f"Row {from_row} holds no copy of item {g}")
        if self.single_seat and to_row != POOL_ROW and self.rows[to_row, g] >= 1:
            raise TransferError(f"Row {to_row} already holds a seat in item {g}")
        self.rows[from_row, g] -= 1
        self.rows[to_row, g] += 1
        return self

    def is_valid(self) -> bool:
        if np.any(self.rows < 0):
            return False
        if not np.array_equal(self.rows.sum(axis=0), self.capacities):
            return False
        if self.single_seat and np.any(self.rows[1:] > 1):
            return False
        return True

    def check(self) -> None:
        if not self.is_valid():
            raise InvariantError("Allocation violates seat conservation or the one-seat rule")

    def copy(self) -> "Allocation":
        return Allocation(self.rows.copy(), self.capacities.copy(), self.single_seat)

    def utilities(self, valuations: Sequence["Valuation"]) -> npt.NDArray[np.int64]:
        return np.array([v.value(self.bundle(a)) for a, v in enumerate(valuations)], dtype=np.int64)


def allocation_new(item_types: Sequence[ItemType], n: int) -> Allocation:
    q = capacity_vector(item_types)
    rows = np.zeros((n + 1, len(q)), dtype=np.int64)
    rows[POOL_ROW] = q
    return Allocation(rows, q)


def transfer(alloc: Allocation, from_row: int, to_row: int, g: int) -> Allocation:
    return alloc.transfer(from_row, to_row, g)


@dataclass(frozen=True)
class Instance:
    item_types: tuple[ItemType, ...]
    agents: tuple[Agent, ...]
    valuations: tuple["Valuation", ...]

    def __post_init__(self):
        if len(self.agents) != len(self.valuations):
            raise InputError("Every agent needs exactly one valuation")

    @property
    def n(self) -> int:
        return len(self.agents)

    @property
    def m(self) -> int:
        return len(self.item_types)

    @property
    def capacities(self) -> npt.NDArray[np.int64]:
        return capacity_vector(self.item_types)

    @property
    def q_total(self) -> int:
        return int(self.capacities.sum())

    @property
    def q_max(self) -> int:
        return int(self.capacities.max()) if self.m else 0

    @property
    def c_max(self) -> int:
        return max((v.course_max for v in self.valuations), default=0)

    @property
    def d_max(self) -> int:
        return max((len(v.approved) for v in self.valuations), default=0)

    def new_allocation(self) -> Allocation:
        return allocation_new(self.item_types, self.n)
