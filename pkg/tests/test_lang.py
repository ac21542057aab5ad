import pytest

from linbisim.lang import (Bounds, BoundsError, Machine, ModelSyntaxError, ModelValidationError,
                           NullDereference, PoolExhausted, init_config, load_program, parse,
                           step, validate)
from linbisim.lang.ast import Assign, Cas, walk_stmts
from linbisim.lang.interp import IDLE, RUNNING
from linbisim.lts import TAU, ActionLabel
from linbisim.models import get_model


def program(src):
    return load_program(src)


def rules(src):
    return [i.rule for i in validate(parse(src))]


CAS_SRC = """
shared x : int[0..3] = 0
method f() {
    local d
    d := cas(x, 1, 2)
    if d { return 1 } else { return 0 }
}
"""


class TestParser:
    def test_empty_source(self):
        with pytest.raises(ModelSyntaxError, match="no method declared"):
            parse("")

    def test_treiber_methods(self):
        p = get_model("treiber").program()
        assert [m.name for m in p.methods] == ["push", "pop"]
        push = p.method("push")
        assert push.param == "v"
        assert any(isinstance(s, Assign) and isinstance(s.rhs, Cas) for s in walk_stmts(push.body))

    def test_syntax_error_location(self):
        with pytest.raises(ModelSyntaxError) as info:
            parse("method f() {\n  x := := 1\n}")
        assert info.value.line == 2

    def test_comments_and_optional_semicolons(self):
        p = parse("// c\nshared c : int[0..1] = 0;\nmethod f() { skip; return; }\n")
        assert p.shared[0].name == "c" and p.methods[0].name == "f"

    def test_shared_after_method_rejected(self):
        with pytest.raises(ModelSyntaxError, match="precede"):
            parse("method f() { return }\nshared c : int[0..1]")


class TestValidate:
    def test_treiber_ok(self):
        assert validate(get_model("treiber").program()) == []

    def test_loop_inside_atomic(self):
        src = "shared c : int[0..1]\nmethod f() { atomic { while true { skip } } return }"
        assert "loop-in-atomic" in rules(src)
        with pytest.raises(ModelValidationError):
            load_program(src)

    def test_undeclared_shared(self):
        assert rules("method f() { y := 1\n return }") == ["undeclared"]

    def test_duplicate_method(self):
        assert "duplicate-method" in rules("method f() { return }\nmethod f() { return }")

    def test_break_outside_loop(self):
        assert rules("method f() { break\n return }") == ["break-outside-loop"]

    def test_literal_out_of_range(self):
        assert "literal-range" in rules("shared c : int[0..2]\nmethod f() { c := 7\n return }")

    def test_return_in_atomic(self):
        assert "return-in-atomic" in rules("method f() { atomic { return } }")

    def test_every_builtin_validates(self):
        from linbisim.models import CATALOG
        for entry in CATALOG.values():
            assert validate(entry.program()) == [], entry.name


class TestBounds:
    def test_pool_zero(self):
        with pytest.raises(BoundsError):
            Bounds(threads=2, ops=1, pool=0)

    def test_default_pool(self):
        assert Bounds(threads=2, ops=3).pool == 7

    def test_label(self):
        assert Bounds(threads=3, ops=1).label == "3/1"


class TestInitConfig:
    def test_treiber(self):
        p = get_model("treiber").program()
        c = init_config(p, Bounds(threads=2, ops=1))
        assert c.shared == (None,)
        assert len(c.threads) == 2
        assert all(t.status == IDLE for t in c.threads)

    def test_single_thread(self):
        c = init_config(get_model("treiber").program(), Bounds(threads=1, ops=1))
        assert len(c.threads) == 1

    def test_hazard_array(self):
        c = init_config(get_model("treiber_hp").program(), Bounds(threads=3, ops=1))
        assert (None, None, None) in c.shared


class TestStep:
    def test_idle_counter_calls_inc(self):
        m = Machine(get_model("counter_abs").program(), Bounds(threads=1, ops=1))
        moves = step(m, m.init_config())
        assert [lab for lab, _ in moves] == [ActionLabel.call(1, "inc")]

    def test_atomic_increment_is_one_tau(self):
        m = Machine(get_model("counter_abs").program(), Bounds(threads=1, ops=1))
        (_, after_call), = m.step(m.init_config())
        (lab, after), = m.step(after_call)
        assert lab == TAU
        assert after_call.shared == (0,) and after.shared == (1,)
        (ret, _), = m.step(after)
        assert ret == ActionLabel.ret(1, "inc")

    def test_failing_cas_leaves_store_unchanged(self):
        m = Machine(program(CAS_SRC), Bounds(threads=1, ops=1))
        (_, c1), = m.step(m.init_config())
        (lab, c2), = m.step(c1)
        assert lab == TAU
        assert c2.shared == c1.shared == (0,)
        assert c2.threads[0].locals == (False,)
        (ret, _), = m.step(c2)
        assert ret == ActionLabel.ret(1, "f", 0)

    def test_succeeding_cas(self):
        src = CAS_SRC.replace("= 0", "= 1")
        m = Machine(program(src), Bounds(threads=1, ops=1))
        (_, c1), = m.step(m.init_config())
        (_, c2), = m.step(c1)
        assert c2.shared == (2,)

    def test_values_enumerated(self):
        m = Machine(get_model("treiber").program(), Bounds(threads=1, ops=1, values=2))
        labels = [lab for lab, _ in m.step(m.init_config())]
        assert labels == [ActionLabel.call(1, "push", 1), ActionLabel.call(1, "push", 2),
                          ActionLabel.call(1, "pop")]

    def test_client_restricts_methods(self):
        entry = get_model("counter_d1")
        m = Machine(entry.program(), entry.bounds(2, 1))
        labels = [lab for lab, _ in m.step(m.init_config())]
        assert labels == [ActionLabel.call(1, "dec"), ActionLabel.call(2, "inc")]

    def test_sync_start_gates_internal_moves(self):
        entry = get_model("counter_d1")
        m = Machine(entry.program(), entry.bounds(2, 1))
        (_, c1), _ = m.step(m.init_config())
        assert c1.threads[0].status == RUNNING
        assert [lab for lab, _ in m.step(c1)] == [ActionLabel.call(2, "inc")]

    def test_null_dereference(self):
        src = "shared p : ref = null\nmethod f() { local v\n v := p.value\n return v }"
        m = Machine(program(src), Bounds(threads=1, ops=1))
        (_, c1), = m.step(m.init_config())
        with pytest.raises(NullDereference) as info:
            m.step(c1)
        assert info.value.thread == 1

    def test_pool_exhaustion(self):
        src = "shared p : ref = null\nmethod f() { p := new_node(1)\n return }"
        prog = program(src)
        prune = Machine(prog, Bounds(threads=1, ops=2, pool=1))
        c = prune.init_config()
        for _ in range(3):                 # call, allocate, return
            (_, c), = prune.step(c)
        (_, c), = prune.step(c)           # second call
        assert prune.step(c) == []
        strict = Machine(prog, Bounds(threads=1, ops=2, pool=1, pool_exhaustion="error"))
        with pytest.raises(PoolExhausted):
            strict.step(c)

    def test_local_spin_is_tau_self_loop(self):
        entry = get_model("counter_d2")
        m = Machine(entry.program(), Bounds(threads=1, ops=1))
        (lab, c1), = [mv for mv in m.step(m.init_config()) if mv[0].method == "dec"]
        (lab, c2), = m.step(c1)
        assert lab == TAU
        assert m.step(c2) == [(TAU, c2)]
