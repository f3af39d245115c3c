"""Welfare and fairness measures of an allocation.

Pairwise counters are over ordered pairs (i, j), i != j. When every valuation is
structured and every bundle holds at most one seat per slot, the counters are
computed with matrix products; otherwise each pair is evaluated exactly.
"""
from __future__ import annotations

import itertools
import logging
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
import numpy.typing as npt

import constants
from utils.core import Allocation, Instance, bundle_size
from utils.valuation import StructuredValuation, Valuation

logger = logging.getLogger(__name__)


@dataclass
class MetricsReport:
    usw: int
    usw_pct: float
    nsw_norm: float
    zero_count: int
    envy: int
    ef1_violations: int
    efx_violations: int
    pmms_violations: int
    bundle_histogram: dict[int, int] = field(default_factory=dict)
    bundle_mean: float = 0.0
    bundle_std: float = 0.0

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, float):
                d[k] = round(v, constants.REPORT_DECIMALS)
        d["bundle_histogram"] = {str(k): int(v) for k, v in sorted(self.bundle_histogram.items())}
        return d


def usw(alloc: Allocation, valuations: Sequence[Valuation]) -> tuple[int, float]:
    total = int(alloc.utilities(valuations).sum())
    seats = int(alloc.capacities.sum())
    return total, (total / seats if seats else 0.0)


def geometric_mean_positive(utilities: npt.ArrayLike) -> float:
    u = np.asarray(utilities, dtype=float)
    pos = u[u > 0]
    if pos.size == 0:
        return 0.0
    return float(np.exp(np.log(pos).mean()))


def nsw(alloc: Allocation, valuations: Sequence[Valuation]) -> tuple[float, int]:
    """Normalised Nash welfare over positive utilities, and the number of zero-utility agents."""
    u = alloc.utilities(valuations)
    return geometric_mean_positive(u), int((u == 0).sum())


# Vectorised path

def _fast_path_ok(alloc: Allocation, valuations: Sequence[Valuation]) -> bool:
    if not valuations or not all(isinstance(v, StructuredValuation) for v in valuations):
        return False
    X = alloc.agent_rows()
    if np.any(X > 1):
        return False
    slots = np.asarray(valuations[0].slot_of)
    for row in X:
        held = slots[row > 0]
        if held.size != np.unique(held).size:
            return False
    return True


def _pair_tables(alloc: Allocation, valuations: Sequence[StructuredValuation]):
    X = alloc.agent_rows().astype(float)
    n, m = X.shape
    A = np.zeros((n, m))
    for i, v in enumerate(valuations):
        A[i, list(v.approved)] = 1.0
    caps = np.array([v.course_max for v in valuations], dtype=np.int64)
    slots = np.asarray(valuations[0].slot_of)
    own_approved = (A * X).sum(axis=1).astype(np.int64)
    own_value = np.minimum(caps, own_approved)
    cnt = np.rint(A @ X.T).astype(np.int64)
    size = X.sum(axis=1).astype(np.int64)
    # covered[i, s]: agent i's own approved items cover slot s
    n_slots = int(slots.max()) + 1 if m else 0
    onehot = np.zeros((m, n_slots))
    onehot[np.arange(m), slots] = 1.0
    covered = ((A * X) @ onehot) > 0
    shared_ok = A * covered[:, slots]
    shared = np.rint(shared_ok @ X.T).astype(np.int64)
    off_diag = ~np.eye(n, dtype=bool)
    nonempty = (size > 0)[None, :] & off_diag
    return caps, own_approved, own_value, cnt, size, shared, nonempty, off_diag


def _fast_counts(alloc: Allocation, valuations: Sequence[StructuredValuation]) -> tuple[int, int, int, int]:
    caps, own_approved, own_value, cnt, size, shared, nonempty, off_diag = _pair_tables(alloc, valuations)
    c = caps[:, None]
    mine = own_value[:, None]
    envy = (mine < np.minimum(c, cnt)) & off_diag
    ef1 = (mine < np.minimum(c, cnt - 1)) & nonempty
    best_removal = np.where(size[None, :] > cnt, np.minimum(c, cnt), np.minimum(c, cnt - 1))
    efx = (mine < best_removal) & nonempty
    singles = own_approved[:, None] + cnt - 2 * shared
    pmms = (mine < np.minimum(c, shared + singles // 2)) & off_diag
    return int(envy.sum()), int(ef1.sum()), int(efx.sum()), int(pmms.sum())


# Exact pairwise path

def _without(S, g):
    T = S.copy()
    T[g] -= 1
    return T


def _pair_envy(v: Valuation, Xi, Xj) -> tuple[bool, bool, bool]:
    mine = v.value(Xi)
    if bundle_size(Xj) == 0 or mine >= v.value(Xj):
        return False, False, False
    removals = [v.value(_without(Xj, g)) for g in np.flatnonzero(Xj)]
    return True, all(mine < r for r in removals), any(mine < r for r in removals)


def _pmms_share(v: Valuation, combined, restrict: bool = True) -> int:
    types = [g for g in np.flatnonzero(combined) if (g in v.approved or not restrict)]
    best = 0
    for counts in itertools.product(*(range(int(combined[g]) + 1) for g in types)):
        T = np.zeros_like(combined)
        T[types] = counts
        best = max(best, min(v.value(T), v.value(combined - T)))
    return best


def envy_counts(alloc: Allocation, valuations: Sequence[Valuation], fast: bool = True) -> tuple[int, int, int]:
    if fast and _fast_path_ok(alloc, valuations):
        envy, ef1, efx, _ = _fast_counts(alloc, valuations)
        return envy, ef1, efx
    envy = ef1 = efx = 0
    for i, v in enumerate(valuations):
        Xi = alloc.bundle(i)
        for j in range(alloc.n):
            if i == j:
                continue
            e, e1, ex = _pair_envy(v, Xi, alloc.bundle(j))
            envy += e
            ef1 += e1
            efx += ex
    return envy, ef1, efx


def pmms_violations(alloc: Allocation, valuations: Sequence[Valuation], fast: bool = True, restrict: bool = True) -> int:
    if fast and restrict and _fast_path_ok(alloc, valuations):
        return _fast_counts(alloc, valuations)[3]
    count = 0
    for i, v in enumerate(valuations):
        Xi = alloc.bundle(i)
        mine = v.value(Xi)
        for j in range(alloc.n):
            if i != j and mine < _pmms_share(v, Xi + alloc.bundle(j), restrict):
                count += 1
    return count


def leximin_compare(u: Sequence[int], w: Sequence[int]) -> int:
    """-1, 0 or 1 as u is leximin-worse, equal or better than w."""
    if len(u) != len(w):
        raise ValueError(f"Utility vectors differ in length: {len(u)} vs {len(w)}")
    su, sw = sorted(u), sorted(w)
    return (su > sw) - (su < sw)


def bundle_histogram(alloc: Allocation) -> tuple[dict[int, int], float, float]:
    sizes = alloc.sizes()
    values, counts = np.unique(sizes, return_counts=True)
    hist = {int(k): int(c) for k, c in zip(values, counts)}
    if sizes.size == 0:
        return hist, 0.0, 0.0
    return hist, float(sizes.mean()), float(sizes.std())


def evaluate(alloc: Allocation, instance: Instance) -> MetricsReport:
    vals = instance.valuations
    total, pct = usw(alloc, vals)
    nsw_norm, zeros = nsw(alloc, vals)
    if _fast_path_ok(alloc, vals):
        envy, ef1, efx, pmms = _fast_counts(alloc, vals)
    else:
        logger.debug("Bundles not slot-distinct or valuations generic; counting pairs exactly")
        envy, ef1, efx = envy_counts(alloc, vals, fast=False)
        pmms = pmms_violations(alloc, vals, fast=False)
    hist, mean, std = bundle_histogram(alloc)
    return MetricsReport(
        usw=total, usw_pct=pct, nsw_norm=nsw_norm, zero_count=zeros,
        envy=envy, ef1_violations=ef1, efx_violations=efx, pmms_violations=pmms,
        bundle_histogram=hist, bundle_mean=mean, bundle_std=std,
    )
