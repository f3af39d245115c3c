"""Binary valuations encoded by linear constraints.

A bundle T is feasible for an agent when Z @ T <= b, and the agent's value for a
bundle S is the size of its largest feasible sub-bundle. ``StructuredValuation``
covers the course case (one seat per time slot, a course cap, approved courses
only) with a matroid-rank fast path; ``ConstraintValuation`` evaluates any
constraint system exactly by enumeration.
"""
from __future__ import annotations

import itertools
from typing import Iterable, Sequence, Union

import numpy as np
import numpy.typing as npt

from utils.core import Bundle, InputError, add_item, bundle_size, remove_item


class _BaseValuation:
    approved: frozenset[int]
    course_max: int
    slot_of: tuple[int, ...]

    def value(self, S: Bundle) -> int:
        raise NotImplementedError

    def marginal(self, S: Bundle, g: int) -> int:
        return self.value(add_item(S, g)) - self.value(S)

    def marginal_gain_set(self, S: Bundle) -> frozenset[int]:
        # Unapproved types are infeasible on their own, so they never add value
        return frozenset(g for g in self.approved if self.marginal(S, g) == 1)

    def exchangeable(self, S: Bundle, g: int, h: int) -> bool:
        if g == h:
            return True
        return self.value(S) == self.value(add_item(remove_item(S, g), h))

    def is_clean(self, S: Bundle) -> bool:
        return self.value(S) == bundle_size(S)

    def best_bundle(self, available: Bundle, ratings: Sequence[int]) -> list[int]:
        """Largest clean bundle of single seats drawn from ``available``.

        Ties go to the larger rating total, then to the lexicographically smallest ids.
        """
        m = len(available)
        candidates = sorted(g for g in self.approved if available[g] > 0)
        for size in range(min(self.course_max, len(candidates)), 0, -1):
            best, best_key = None, None
            for combo in itertools.combinations(candidates, size):
                T = np.zeros(m, dtype=np.int64)
                T[list(combo)] = 1
                if self.value(T) != size:
                    continue
                key = -sum(ratings[g] for g in combo)
                if best_key is None or key < best_key:
                    best, best_key = list(combo), key
            if best is not None:
                return best
        return []

    def constraint_system(self) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
        raise NotImplementedError


class ConstraintValuation(_BaseValuation):
    """Generic evaluator for an arbitrary downward-closed system Z @ T <= b."""

    def __init__(
        self,
        Z: npt.ArrayLike,
        b: npt.ArrayLike,
        slot_of: Sequence[int],
        course_max: int | None = None,
        approved: Iterable[int] | None = None,
    ):
        self.Z = np.atleast_2d(np.asarray(Z, dtype=np.int64))
        self.b = np.asarray(b, dtype=np.int64)
        if self.Z.shape[0] != self.b.shape[0]:
            raise InputError(f"Constraint matrix has {self.Z.shape[0]} rows but limit vector has {len(self.b)}")
        if np.any(self.b < 0):
            raise InputError("Negative limits make the empty bundle infeasible")
        self.slot_of = tuple(int(s) for s in slot_of)
        m = self.Z.shape[1]
        if approved is None:
            # g is approved iff the singleton bundle is feasible
            approved = [g for g in range(m) if np.all(self.Z[:, g] <= self.b)]
        self.approved = frozenset(int(g) for g in approved)
        self.course_max = len(self.approved) if course_max is None else int(course_max)

    def value(self, S: Bundle) -> int:
        idx = np.array(sorted(g for g in self.approved if S[g] > 0), dtype=np.int64)
        if idx.size == 0:
            return 0
        grid = np.array(list(itertools.product(*(range(int(S[g]) + 1) for g in idx))), dtype=np.int64)
        feasible = np.all(grid @ self.Z[:, idx].T <= self.b, axis=1)
        return int(grid.sum(axis=1)[feasible].max())

    def constraint_system(self):
        return self.Z.copy(), self.b.copy()


class StructuredValuation(_BaseValuation):
    """Approved courses, at most one seat per time slot, at most ``course_max`` seats.

    The value is min(course_max, number of distinct slots covered by approved
    types held), a truncated partition-matroid rank.
    """

    def __init__(self, approved: Iterable[int], slot_of: Sequence[int], course_max: int):
        self.approved = frozenset(int(g) for g in approved)
        self.slot_of = tuple(int(s) for s in slot_of)
        self.course_max = int(course_max)
        self._mask = np.zeros(len(self.slot_of), dtype=bool)
        self._mask[list(self.approved)] = True
        self._slots = np.asarray(self.slot_of, dtype=np.int64)

    def _slot_counts(self, S: Bundle) -> dict[int, int]:
        counts: dict[int, int] = {}
        for g in np.flatnonzero(S):
            if self._mask[g]:
                s = int(self._slots[g])
                counts[s] = counts.get(s, 0) + 1
        return counts

    def covered_slots(self, S: Bundle) -> set[int]:
        return set(self._slot_counts(S))

    def value(self, S: Bundle) -> int:
        return min(self.course_max, len(self._slot_counts(S)))

    def marginal(self, S: Bundle, g: int) -> int:
        if not self._mask[g]:
            return 0
        covered = self._slot_counts(S)
        if len(covered) >= self.course_max:
            return 0
        return int(int(self._slots[g]) not in covered)

    def marginal_gain_set(self, S: Bundle) -> frozenset[int]:
        covered = self._slot_counts(S)
        if len(covered) >= self.course_max:
            return frozenset()
        return frozenset(g for g in self.approved if int(self._slots[g]) not in covered)

    def exchangeable(self, S: Bundle, g: int, h: int) -> bool:
        if g == h:
            return True
        if S[g] < 1:
            raise InputError(f"Exchange of item {g} requested for a bundle that does not hold it")
        counts = self._slot_counts(S)
        before = min(self.course_max, len(counts))
        if self._mask[g] and S[g] == 1:
            s = int(self._slots[g])
            counts[s] -= 1
            if counts[s] == 0:
                del counts[s]
        if self._mask[h] and S[h] == 0:
            s = int(self._slots[h])
            counts[s] = counts.get(s, 0) + 1
        return min(self.course_max, len(counts)) == before

    def best_bundle(self, available: Bundle, ratings: Sequence[int]) -> list[int]:
        # Greedy is optimal on a partition matroid truncated at course_max
        candidates = sorted((g for g in self.approved if available[g] > 0), key=lambda g: (-ratings[g], g))
        chosen, covered = [], set()
        for g in candidates:
            if len(chosen) >= self.course_max:
                break
            s = int(self._slots[g])
            if s not in covered:
                chosen.append(g)
                covered.add(s)
        return chosen

    def constraint_system(self):
        m = len(self.slot_of)
        rows, limits = [], []
        for s in sorted({self.slot_of[g] for g in self.approved}):
            row = np.zeros(m, dtype=np.int64)
            row[[g for g in self.approved if self.slot_of[g] == s]] = 1
            rows.append(row)
            limits.append(1)
        row = np.zeros(m, dtype=np.int64)
        row[list(self.approved)] = 1
        rows.append(row)
        limits.append(self.course_max)
        for g in range(m):
            if g not in self.approved:
                row = np.zeros(m, dtype=np.int64)
                row[g] = 1
                rows.append(row)
                limits.append(0)
        rows.extend(np.eye(m, dtype=np.int64))
        limits.extend([1] * m)
        return np.vstack(rows), np.array(limits, dtype=np.int64)

    def to_constraint_valuation(self) -> ConstraintValuation:
        Z, b = self.constraint_system()
        return ConstraintValuation(Z, b, self.slot_of, self.course_max, self.approved)


Valuation = Union[StructuredValuation, ConstraintValuation]


def value(val: Valuation, S: Bundle) -> int:
    return val.value(S)


def marginal(val: Valuation, S: Bundle, g: int) -> int:
    return val.marginal(S, g)


def marginal_gain_set(val: Valuation, S: Bundle) -> frozenset[int]:
    return val.marginal_gain_set(S)


def exchangeable(val: Valuation, S: Bundle, g: int, h: int) -> bool:
    return val.exchangeable(S, g, h)


def is_clean(val: Valuation, S: Bundle) -> bool:
    return val.is_clean(S)
