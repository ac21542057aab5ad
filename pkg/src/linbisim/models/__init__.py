"""Built-in model corpus: stacks and counters, their specifications, and mutants."""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, Mapping, Optional, Tuple

from ..lang import Bounds, Program, load_program


class UnknownModel(KeyError):
    def __str__(self):
        return self.args[0]


@dataclass(frozen=True)
class ModelEntry:
    """A catalogued model.

    ``expected`` holds verdicts against ``spec`` for the keys ``bisim``,
    ``div_bisim``, ``refinement``, ``linearizable`` and ``lock_free``. A
    ``client`` / ``sync_start`` pair is the default client for experiments
    with this model (used when the caller gives none).
    """

    name: str
    role: str                                   # "spec" | "impl" | "mutant"
    spec: str                                   # specification to check against
    seq_spec: str                               # "stack" | "counter"
    expected: Mapping[str, bool] = field(default_factory=dict)
    client: Optional[Mapping[int, Tuple[str, ...]]] = None
    sync_start: bool = False
    description: str = ""

    @property
    def source(self) -> str:
        return resources.files(__package__).joinpath(f"{self.name}.model").read_text()

    def program(self) -> Program:
        return load_program(self.source)

    def bounds(self, threads=2, ops=1, values=1, **kw) -> Bounds:
        """Bounds carrying this entry's default client."""
        kw.setdefault("client", self.client)
        kw.setdefault("sync_start", self.sync_start)
        return Bounds(threads=threads, ops=ops, values=values, **kw)


_ALL_TRUE = dict(bisim=True, div_bisim=True, refinement=True, linearizable=True, lock_free=True)
_DEC_INC = {1: ("dec",), 2: ("inc",)}

CATALOG: Dict[str, ModelEntry] = {e.name: e for e in [
    ModelEntry("counter_abs", "spec", "counter_abs", "counter", _ALL_TRUE,
               description="abstract counter, atomic increment"),
    ModelEntry("counter_cas", "impl", "counter_abs", "counter", _ALL_TRUE,
               description="CAS-retry counter"),
    ModelEntry("counter_d1", "spec", "counter_d1", "counter", _ALL_TRUE, _DEC_INC, True,
               description="inc/dec counter, atomic dec"),
    ModelEntry("counter_d2", "impl", "counter_d1", "counter",
               dict(bisim=False, div_bisim=False, refinement=True, linearizable=True,
                    lock_free=False), _DEC_INC, True,
               description="inc/dec counter, dec never returns"),
    ModelEntry("counter_d3", "impl", "counter_d1", "counter",
               dict(bisim=True, div_bisim=False, refinement=True, linearizable=True,
                    lock_free=False), _DEC_INC, True,
               description="inc/dec counter, dec waits for c > 0"),
    ModelEntry("stack_spec", "spec", "stack_spec", "stack", _ALL_TRUE,
               description="atomic stack specification"),
    ModelEntry("treiber", "impl", "stack_spec", "stack", _ALL_TRUE,
               description="Treiber's lock-free stack"),
    ModelEntry("treiber_hp", "impl", "stack_spec", "stack", _ALL_TRUE,
               description="Treiber's stack with hazard pointers, wait-free reclamation"),
    ModelEntry("treiber_hp_buggy", "impl", "stack_spec", "stack",
               dict(bisim=True, div_bisim=False, refinement=True, linearizable=True,
                    lock_free=False),
               description="hazard-pointer stack with a blocking reclamation scan"),
    # Non-linearizable only once some thread runs two operations (e.g. 2/2).
    ModelEntry("treiber_mutant_blind_pop", "mutant", "stack_spec", "stack",
               dict(bisim=False, div_bisim=False, refinement=False, linearizable=False),
               description="Treiber's stack, pop writes Top without CAS"),
]}


def get_model(name: str) -> ModelEntry:
    try:
        return CATALOG[name]
    except KeyError:
        raise UnknownModel(f"unknown model {name!r}; catalog: {', '.join(CATALOG)}") from None


def impl_spec_pairs():
    """(impl, spec) name pairs for every non-spec entry."""
    return [(e.name, e.spec) for e in CATALOG.values() if e.role != "spec"]
