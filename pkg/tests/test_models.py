import pytest

from linbisim.lang.ast import Atomic, If, Return, While, walk_stmts
from linbisim.lang.validate import validate
from linbisim.lts import EMPTY
from linbisim.models import CATALOG, UnknownModel, get_model, impl_spec_pairs


class TestCatalog:
    def test_unknown_lists_catalog(self):
        with pytest.raises(UnknownModel) as info:
            get_model("nosuch")
        assert "treiber" in str(info.value)

    def test_every_entry_names_a_spec(self):
        for e in CATALOG.values():
            assert get_model(e.spec).role == "spec"
            assert e.seq_spec in ("stack", "counter")

    def test_specs_check_against_themselves(self):
        for e in CATALOG.values():
            if e.role == "spec":
                assert e.spec == e.name

    def test_pairs(self):
        pairs = impl_spec_pairs()
        assert ("treiber", "stack_spec") in pairs
        assert ("counter_d3", "counter_d1") in pairs
        assert all(get_model(s).role == "spec" for _, s in pairs)

    def test_sources_validate(self):
        for e in CATALOG.values():
            assert validate(e.program()) == [], e.name

    def test_default_client(self):
        b = get_model("counter_d1").bounds(2, 1)
        assert b.client == {1: ("dec",), 2: ("inc",)} and b.sync_start
        assert get_model("treiber").bounds(2, 1).client is None

    def test_client_override(self):
        assert get_model("counter_d1").bounds(2, 1, client=None).client is None


class TestShapes:
    def test_treiber_pop_returns_empty_on_null(self):
        pop = get_model("treiber").program().method("pop")
        guards = [s for s in walk_stmts(pop.body) if isinstance(s, If)]
        assert any(isinstance(s, Return) and s.value is not None
                   and getattr(s.value, "value", None) == EMPTY
                   for g in guards for s in g.then)

    def test_spec_pop_is_one_atomic_block(self):
        pop = get_model("stack_spec").program().method("pop")
        assert sum(isinstance(s, Atomic) for s in pop.body) == 1
        assert not any(isinstance(s, While) for s in walk_stmts(pop.body))

    def test_buggy_retire_waits_on_hazard(self):
        src = get_model("treiber_hp_buggy").source
        assert "tp != t" in src and "retire(t)" in src
        assert "tp != t" not in get_model("treiber_hp").source

    def test_hp_models_share_push_and_pop_loop(self):
        def parts(name):
            text = get_model(name).source
            body = text[text.index("method push"):]
            return body[:body.index("// begin retire")], body[body.rindex("// end retire"):]
        assert parts("treiber_hp") == parts("treiber_hp_buggy")
