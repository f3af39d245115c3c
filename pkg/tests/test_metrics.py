import numpy as np
import pytest

from utils.baselines import pick_order, round_robin, serial_dictatorship
from utils.core import POOL_ROW
from utils.metrics import (
    bundle_histogram,
    envy_counts,
    evaluate,
    geometric_mean_positive,
    leximin_compare,
    nsw,
    pmms_violations,
    usw,
)
from utils.yankee_swap import run_yankee_swap


def assign(instance, holdings):
    alloc = instance.new_allocation()
    for a, items in holdings.items():
        for g in items:
            alloc.transfer(POOL_ROW, alloc.agent_row(a), g)
    return alloc


def mechanisms(instance, seed):
    order = pick_order(instance.agents, seed)
    yield run_yankee_swap(instance, order)[0]
    yield serial_dictatorship(instance, order)
    yield round_robin(instance, order)


class TestWelfare:
    def test_usw(self, steal_instance):
        alloc = assign(steal_instance, {0: [1], 1: [0]})
        assert usw(alloc, steal_instance.valuations) == (2, 1.0)

    def test_usw_partial(self, make_instance):
        inst = make_instance([{0}, set()], slots=[0], capacities=[4], course_max=[1, 1])
        alloc = assign(inst, {0: [0]})
        assert usw(alloc, inst.valuations) == (1, 0.25)

    def test_geometric_mean_skips_zeros(self):
        assert geometric_mean_positive([2, 0, 8]) == pytest.approx(4.0)
        assert geometric_mean_positive([0, 0]) == 0.0

    def test_nsw_counts_zeros(self, make_instance):
        inst = make_instance([{0}, {0}], slots=[0], capacities=[1], course_max=[1, 1])
        alloc = assign(inst, {1: [0]})
        assert nsw(alloc, inst.valuations) == (pytest.approx(1.0), 1)


class TestEnvy:
    def test_full_envy(self, make_instance):
        inst = make_instance([{0, 1}, {0, 1}], slots=[0, 1], capacities=[1, 1], course_max=[2, 2])
        alloc = assign(inst, {1: [0, 1]})
        for fast in (True, False):
            assert envy_counts(alloc, inst.valuations, fast=fast) == (1, 1, 1)
            assert pmms_violations(alloc, inst.valuations, fast=fast) == 1

    def test_ef1_but_not_efx(self, make_instance):
        # Agent 1 holds one item agent 0 wants and one it does not
        inst = make_instance([{0}, {0, 1}], slots=[0, 1], capacities=[1, 1], course_max=[1, 2])
        alloc = assign(inst, {1: [0, 1]})
        for fast in (True, False):
            assert envy_counts(alloc, inst.valuations, fast=fast) == (1, 0, 1)

    def test_no_envy_for_empty_bundles(self, make_instance):
        inst = make_instance([{0}, {0}], slots=[0], capacities=[1], course_max=[1, 1])
        alloc = assign(inst, {})
        assert envy_counts(alloc, inst.valuations) == (0, 0, 0)
        assert pmms_violations(alloc, inst.valuations) == 0

    def test_course_max_caps_envy(self, make_instance):
        inst = make_instance([{0, 1, 2}, {0, 1, 2}], slots=[0, 1, 2], capacities=[1, 1, 1], course_max=[1, 3])
        alloc = assign(inst, {0: [0], 1: [1, 2]})
        assert envy_counts(alloc, inst.valuations) == (0, 0, 0)

    def test_shared_slot_pmms(self, make_instance):
        # Both hold a seat of the same two-seat type; the pair cannot be split better for agent 0
        inst = make_instance([{0, 1}, {0, 1}], slots=[0, 1], capacities=[2, 1], course_max=[2, 2])
        alloc = assign(inst, {0: [0], 1: [0, 1]})
        for fast in (True, False):
            assert pmms_violations(alloc, inst.valuations, fast=fast) == 0
            assert envy_counts(alloc, inst.valuations, fast=fast) == (1, 0, 0)

    def test_conflicting_bundle_uses_exact_path(self, make_instance):
        inst = make_instance([{0, 1}, {0, 1}], slots=[0, 0], capacities=[1, 1], course_max=[2, 2])
        alloc = assign(inst, {1: [0, 1]})
        assert envy_counts(alloc, inst.valuations) == (1, 1, 1)
        report = evaluate(alloc, inst)
        assert (report.envy, report.ef1_violations, report.efx_violations) == (1, 1, 1)
        assert report.pmms_violations == 1


class TestLeximinCompare:
    @pytest.mark.parametrize(
        "u, w, expected",
        [([1, 2], [2, 1], 0), ([0, 3], [1, 1], -1), ([1, 1], [0, 5], 1), ([], [], 0)],
    )
    def test_examples(self, u, w, expected):
        assert leximin_compare(u, w) == expected

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            leximin_compare([1], [1, 2])


class TestHistogram:
    def test_sizes(self, make_instance):
        inst = make_instance([{0, 1}, {0, 1}, set()], slots=[0, 1], capacities=[2, 2], course_max=[2, 2, 1])
        alloc = assign(inst, {0: [0, 1], 1: [0, 1]})
        hist, mean, std = bundle_histogram(alloc)
        assert hist == {0: 1, 2: 2}
        assert mean == pytest.approx(4 / 3)
        assert std == pytest.approx(np.std([2, 2, 0]))

    def test_report_serialises(self, steal_instance):
        alloc = assign(steal_instance, {0: [1], 1: [0]})
        d = evaluate(alloc, steal_instance).to_dict()
        assert d["bundle_histogram"] == {"1": 2}
        assert d["usw"] == 2 and d["usw_pct"] == 1.0


class TestProperties:
    @pytest.mark.parametrize("seed", range(20))
    def test_fast_matches_exact(self, random_instance, seed):
        inst = random_instance(seed, n=6, m=5, max_q=3, max_cmax=3, n_slots=4)
        for alloc in mechanisms(inst, seed):
            assert envy_counts(alloc, inst.valuations, fast=True) == envy_counts(alloc, inst.valuations, fast=False)
            assert pmms_violations(alloc, inst.valuations, fast=True) == pmms_violations(alloc, inst.valuations, fast=False)

    @pytest.mark.parametrize("seed", range(10))
    def test_unapproved_items_do_not_change_pmms(self, random_instance, seed):
        inst = random_instance(seed, n=4, m=4, max_q=2, max_cmax=2, n_slots=3)
        for alloc in mechanisms(inst, seed):
            restricted = pmms_violations(alloc, inst.valuations, fast=False, restrict=True)
            assert restricted == pmms_violations(alloc, inst.valuations, fast=False, restrict=False)

    @pytest.mark.parametrize("seed", range(30))
    def test_violation_ordering(self, random_instance, seed):
        inst = random_instance(seed, n=10, m=6, max_q=2, max_cmax=3, n_slots=4)
        for alloc in mechanisms(inst, seed):
            envy, ef1, efx = envy_counts(alloc, inst.valuations)
            assert envy >= efx >= ef1 >= 0

    @pytest.mark.parametrize("seed", range(10))
    def test_item_relabelling_invariance(self, make_instance, random_instance, seed):
        inst = random_instance(seed, n=6, m=5, max_q=2, max_cmax=3, n_slots=3)
        alloc = serial_dictatorship(inst, pick_order(inst.agents, seed))
        perm = np.random.default_rng(seed).permutation(inst.m)
        new_id = {int(old): k for k, old in enumerate(perm)}
        relabelled = make_instance(
            [{new_id[g] for g in v.approved} for v in inst.valuations],
            slots=[inst.item_types[int(old)].slot for old in perm],
            capacities=[inst.item_types[int(old)].capacity for old in perm],
            course_max=[v.course_max for v in inst.valuations],
            statuses=[a.status for a in inst.agents],
        )
        moved = assign(relabelled, {a: [new_id[int(g)] for g in np.flatnonzero(alloc.bundle(a))] for a in range(inst.n)})
        before = evaluate(alloc, inst).to_dict()
        after = evaluate(moved, relabelled).to_dict()
        assert before == after
