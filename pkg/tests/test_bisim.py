import random

import pytest
from hypothesis import given, settings, strategies as st

from linbisim.bisim import (ContractError, Partition, SpecNotLockFree, coarsest_partition,
                            distinguish, equivalent, mark_divergent, spec_lockfree_sanity,
                            tau_lasso, verify_object)
from linbisim.lts import TAU, ActionLabel, Lts, disjoint_union, make_lts

import oracles
from support import explore, lts_of

A = ActionLabel.call(1, "a")
B = ActionLabel.call(1, "b")


def in_block_tau_reach(lts, block, s):
    seen, todo = {s}, [s]
    while todo:
        x = todo.pop()
        for lab, d in lts.out(x):
            if not lab.visible and block[d] == block[x] and d not in seen:
                seen.add(d)
                todo.append(d)
    return seen


def divergent(lts, block, s):
    reach = in_block_tau_reach(lts, block, s)
    return any(x in in_block_tau_reach(lts, block, d)
               for x in reach for lab, d in lts.out(x)
               if not lab.visible and block[d] == block[x])


def is_branching_bisimulation(lts, block, divergence):
    """Check the transfer conditions directly on a partition."""
    members = {}
    for s, b in enumerate(block):
        members.setdefault(b, []).append(s)
    for s in range(lts.num_states):
        for lab, s2 in lts.out(s):
            if not lab.visible and block[s2] == block[s]:
                continue
            for t in members[block[s]]:
                if not any(l2 == lab and block[t2] == block[s2]
                           for t1 in in_block_tau_reach(lts, block, t)
                           for l2, t2 in lts.out(t1)):
                    return False
    if divergence:
        for ms in members.values():
            if len({divergent(lts, block, s) for s in ms}) > 1:
                return False
    return True


def pairs(partition):
    return {(s, t) for blk in partition.blocks for s in blk for t in blk}


labels = st.sampled_from([TAU, TAU, A, B])


@st.composite
def small_lts(draw, max_states=8):
    n = draw(st.integers(1, max_states))
    states = st.integers(0, n - 1)
    trans = draw(st.lists(st.tuples(states, labels, states), max_size=3 * n))
    return Lts(n, draw(states), trans)


class TestPartition:
    def test_from_block_of(self):
        p = Partition.from_block_of([0, 1, 0])
        assert p.blocks == ((0, 2), (1,))
        assert p.same_block(0, 2) and not p.same_block(0, 1)
        assert len(p) == 2

    def test_tau_chain_collapses(self):
        p = coarsest_partition(make_lts(3, 0, [(0, TAU, 1), (1, A, 2)]))
        assert p.block_of == (0, 0, 1)

    def test_visible_chain_kept_apart(self):
        p = coarsest_partition(make_lts(3, 0, [(0, A, 1), (1, A, 2)]))
        assert len(p) == 3

    def test_divergence_splits_self_loop(self):
        l = make_lts(2, 0, [(0, TAU, 0), (0, TAU, 1)])
        assert len(coarsest_partition(l, False)) == 1
        assert len(coarsest_partition(l, True)) == 2

    def test_blocks_numbered_by_smallest_state(self):
        p = coarsest_partition(make_lts(3, 0, [(1, A, 0), (2, A, 0)]))
        assert p.block_of == (0, 1, 1)


class TestMarkDivergent:
    def test_self_loop(self):
        l = make_lts(2, 0, [(0, TAU, 0), (0, A, 1)])
        assert mark_divergent(l, Partition.from_block_of([0, 1])) == {0}

    def test_acyclic(self):
        l = make_lts(3, 0, [(0, TAU, 1), (1, A, 2)])
        assert mark_divergent(l, coarsest_partition(l, True)) == set()

    def test_cycle_leaving_block_not_divergent(self):
        l = make_lts(2, 0, [(0, TAU, 1), (1, TAU, 0)])
        assert mark_divergent(l, Partition.from_block_of([0, 1])) == set()

    def test_dec_spin(self):
        lts = lts_of("counter_d2", 1, 1)
        marked = mark_divergent(lts, coarsest_partition(lts, True))
        spinning = {s for s, lab, d in lts.transitions if s == d and lab == TAU}
        assert spinning and spinning <= marked


class TestEquivalent:
    def test_counter_d1_vs_d2(self):
        v = equivalent(lts_of("counter_d1"), lts_of("counter_d2"), False)
        assert not v.equivalent
        assert v.witness.replays_on(v.union)

    def test_treiber_vs_spec(self):
        assert equivalent(lts_of("treiber"), lts_of("stack_spec"), True).equivalent

    def test_buggy_hp_lasso(self):
        v = equivalent(lts_of("treiber_hp_buggy", 2, 2), lts_of("stack_spec", 2, 2), True)
        assert not v.equivalent
        w = v.witness
        assert w.is_lasso and w.replays_on(v.union)
        assert all(not lab.visible for _, lab in w.cycle)

    def test_reflexive(self):
        l = lts_of("treiber_hp")
        assert equivalent(l, l, True).equivalent

    def test_verdict_records_mode(self):
        v = equivalent(make_lts(1, 0, []), make_lts(1, 0, []), True)
        assert v.equivalent and v.divergence_used and v.witness is None and v.offset == 1


class TestDistinguish:
    def test_contract_error(self):
        u, off = disjoint_union(make_lts(1, 0, []), make_lts(1, 0, []))
        p = coarsest_partition(u)
        with pytest.raises(ContractError):
            distinguish(u, p, 0, off, False)

    def test_visible_difference(self):
        a = make_lts(2, 0, [(0, A, 1)])
        b = make_lts(2, 0, [(0, B, 1)])
        u, off = disjoint_union(a, b)
        w = distinguish(u, coarsest_partition(u), 0, off, False)
        assert w.replays_on(u)
        assert w.start in (0, off)

    def test_divergence_only_gives_lasso(self):
        a = make_lts(2, 0, [(0, A, 1)])
        b = make_lts(2, 0, [(0, A, 1), (1, TAU, 1)])
        v = equivalent(a, b, True)
        assert not v.equivalent
        w = v.witness
        assert w.is_lasso and w.visible_trace() == [A]
        assert w.start == v.offset


class TestLockFreeSanity:
    def test_stack_spec(self):
        for t, o in [(2, 1), (2, 2), (3, 1)]:
            assert spec_lockfree_sanity(lts_of("stack_spec", t, o)) is None

    def test_counter_d1(self):
        assert spec_lockfree_sanity(lts_of("counter_d1")) is None

    def test_counter_d2(self):
        lts = lts_of("counter_d2")
        w = spec_lockfree_sanity(lts)
        assert w is not None and w.is_lasso and w.replays_on(lts)

    def test_tau_lasso_none_on_acyclic(self):
        assert tau_lasso(make_lts(2, 0, [(0, TAU, 1)])) is None


class TestVerifyObject:
    def test_treiber(self):
        r = verify_object(lts_of("treiber"), lts_of("stack_spec"))
        assert (r.linearizable, r.lock_free, r.witness) == (True, True, None)

    def test_hp(self):
        r = verify_object(lts_of("treiber_hp"), lts_of("stack_spec"))
        assert (r.linearizable, r.lock_free) == (True, True)

    def test_buggy_hp(self):
        r = verify_object(lts_of("treiber_hp_buggy", 2, 2), lts_of("stack_spec", 2, 2))
        assert (r.linearizable, r.lock_free) == (True, False)
        assert r.witness.is_lasso
        assert r.summary == "linearizable; lock-freedom refuted by a divergence"

    def test_not_established(self):
        r = verify_object(lts_of("counter_d2"), lts_of("counter_d1"))
        assert (r.linearizable, r.lock_free) == (None, None)
        assert "not established" in r.summary

    def test_divergent_spec_rejected(self):
        with pytest.raises(SpecNotLockFree):
            verify_object(lts_of("counter_d1"), lts_of("counter_d2"))


class TestAgainstBruteForce:
    @settings(max_examples=300, deadline=None)
    @given(small_lts(), st.booleans())
    def test_partition_matches_oracle(self, lts, div):
        assert pairs(coarsest_partition(lts, div)) == oracles.brute_bisim(lts, div)

    @settings(max_examples=300, deadline=None)
    @given(small_lts(), st.booleans())
    def test_partition_is_bisimulation(self, lts, div):
        assert is_branching_bisimulation(lts, coarsest_partition(lts, div).block_of, div)

    @settings(max_examples=200, deadline=None)
    @given(small_lts(), small_lts(), st.booleans())
    def test_symmetric(self, a, b, div):
        assert equivalent(a, b, div).equivalent == equivalent(b, a, div).equivalent

    @settings(max_examples=200, deadline=None)
    @given(small_lts(), small_lts(), st.booleans())
    def test_witness_replays(self, a, b, div):
        v = equivalent(a, b, div)
        if not v.equivalent:
            assert v.witness.replays_on(v.union)
            assert v.witness.start in (a.initial, b.initial + v.offset)

    def test_transitive_on_corpus(self):
        rng = random.Random(7)
        for _ in range(100):
            a = oracles.random_lts(rng, max_states=8)
            b = oracles.stutter_variant(rng, a)
            c = oracles.stutter_variant(rng, b)
            for div in (False, True):
                if equivalent(a, b, div).equivalent and equivalent(b, c, div).equivalent:
                    assert equivalent(a, c, div).equivalent

    def test_stutter_variant_equivalent(self):
        rng = random.Random(11)
        for _ in range(200):
            a = oracles.random_lts(rng)
            assert equivalent(a, oracles.stutter_variant(rng, a), False).equivalent
