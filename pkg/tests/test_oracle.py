import pytest

from linbisim.lts import EMPTY, TAU, ActionLabel, make_lts
from linbisim.oracle import (COUNTER, STACK, Event, MalformedHistory, check_lin,
                             check_object_lin, check_well_formed, completions,
                             default_max_events, histories, is_linearizable, pending_calls)

from support import lts_of


def call(t, m, v=None):
    return Event(t, "call", m, v)


def ret(t, m, v=None):
    return Event(t, "ret", m, v)


class TestSeqSpecs:
    def test_stack(self):
        s, r = STACK.apply(STACK.initial, "push", 1)
        assert r is None
        assert STACK.apply(s, "pop", None) == (STACK.initial, 1)
        assert STACK.apply(STACK.initial, "pop", None)[1] == EMPTY

    def test_counter(self):
        s, _ = COUNTER.apply(COUNTER.initial, "inc", None)
        assert COUNTER.apply(s, "dec", None)[0] == COUNTER.initial

    def test_return_domain(self):
        assert set(STACK.return_domain("pop", 2)) == {1, 2, EMPTY}
        assert STACK.return_domain("push", 2) == (None,)


class TestWellFormed:
    def test_double_call(self):
        with pytest.raises(MalformedHistory):
            check_well_formed((call(1, "pop"), call(1, "pop")))

    def test_orphan_return(self):
        with pytest.raises(MalformedHistory):
            check_well_formed((ret(1, "pop", 1),))

    def test_pending(self):
        h = (call(1, "push", 1), call(2, "pop"), ret(1, "push"))
        assert pending_calls(h) == [1]

    def test_event_from_label(self):
        assert Event.from_label(ActionLabel.ret(2, "pop", EMPTY)) == ret(2, "pop", EMPTY)
        with pytest.raises(ValueError):
            Event.from_label(TAU)


class TestHistories:
    def test_no_visible(self):
        assert histories(make_lts(2, 0, [(0, TAU, 1)]), 4) == {()}

    def test_abstract_counter(self):
        got = histories(lts_of("counter_abs", 1, 1), 4)
        assert got == {(), (call(1, "inc"),), (call(1, "inc"), ret(1, "inc"))}

    def test_bounded(self):
        assert max(len(h) for h in histories(lts_of("treiber"), 2)) == 2


class TestCompletions:
    def test_complete_history(self):
        h = (call(1, "push", 1), ret(1, "push"))
        assert completions(h) == {h}

    def test_pending_pop(self):
        h = (call(1, "pop"),)
        assert completions(h, STACK, 1) == {(), h + (ret(1, "pop", 1),),
                                            h + (ret(1, "pop", EMPTY),)}

    def test_two_pending(self):
        h = (call(1, "push", 1), call(2, "pop"))
        # push: drop or return; pop: drop, 1 or EMPTY
        assert len(completions(h, STACK, 1)) == 2 * 3


class TestCheckLin:
    def test_sequential(self):
        h = (call(1, "push", 1), ret(1, "push"), call(1, "pop"), ret(1, "pop", 1))
        assert check_lin(h, STACK).ok

    def test_overlapping(self):
        h = (call(1, "push", 1), call(2, "pop"), ret(1, "push"), ret(2, "pop", 1))
        r = check_lin(h, STACK)
        assert r.ok
        assert r.linearization == (call(1, "push", 1), ret(1, "push"),
                                   call(2, "pop"), ret(2, "pop", 1))

    def test_pop_from_nothing(self):
        assert not check_lin((call(1, "pop"), ret(1, "pop", 2)), STACK).ok

    def test_real_time_order(self):
        h = (call(1, "pop"), ret(1, "pop", 1), call(2, "push", 1), ret(2, "push"))
        assert not check_lin(h, STACK).ok

    def test_pending_rejected(self):
        with pytest.raises(MalformedHistory):
            check_lin((call(1, "pop"),), STACK)

    def test_is_linearizable_uses_completions(self):
        h = (call(1, "push", 1), call(2, "pop"), ret(2, "pop", 1))
        assert is_linearizable(h, STACK, 1)


class TestCheckObjectLin:
    def test_treiber(self):
        r = check_object_lin(lts_of("treiber"), STACK, 4)
        assert r.ok and r.checked > 0

    def test_stack_spec(self):
        assert check_object_lin(lts_of("stack_spec"), STACK, 4).ok

    def test_mutant_2_1_is_linearizable(self):
        # one operation per thread cannot lose an update
        assert check_object_lin(lts_of("treiber_mutant_blind_pop"), STACK, 4).ok

    def test_mutant_2_2(self):
        r = check_object_lin(lts_of("treiber_mutant_blind_pop", 2, 2), STACK, 8)
        assert not r.ok
        h = r.failing_history
        assert not is_linearizable(h, STACK, 1)
        assert is_linearizable(h[:-1], STACK, 1)

    def test_counters(self):
        assert check_object_lin(lts_of("counter_cas"), COUNTER, 4).ok

    def test_default_max_events(self):
        assert default_max_events(2, 1) == 4
