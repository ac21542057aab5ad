"""Labelled transition systems: construction, union, pruning and `.aut` interop."""

from __future__ import annotations

import gc
import re
from collections import deque
from contextlib import contextmanager
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence, Tuple, Union

EMPTY = "EMPTY"

Value = Union[int, str, None]


def value_key(v: Value) -> Tuple[int, int]:
    """Total order on action values: no value, then integers, then EMPTY."""
    if v is None:
        return (0, 0)
    if v == EMPTY:
        return (2, 0)
    return (1, v)


class LtsError(ValueError):
    pass


class AutParseError(LtsError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


@dataclass(frozen=True)
class ActionLabel:
    """A tau step, or a call/return event of one thread.

    ``kind`` is one of ``"tau"``, ``"call"``, ``"ret"``. For calls ``value``
    is the argument, for returns it is the returned value; ``None`` means
    no value, :data:`EMPTY` is the distinguished empty-stack token.
    """

    kind: str
    thread: int = 0
    method: str = ""
    value: Value = None

    def __post_init__(self):
        if self.kind == "tau":
            if self.thread or self.method or self.value is not None:
                raise LtsError("tau carries no thread, method or value")
        elif self.kind in ("call", "ret"):
            if self.thread < 1:
                raise LtsError(f"thread ids start at 1, got {self.thread}")
            if not self.method:
                raise LtsError("visible action needs a method name")
            if not (self.value is None or self.value == EMPTY
                    or (isinstance(self.value, int) and not isinstance(self.value, bool))):
                raise LtsError(f"unsupported action value {self.value!r}")
        else:
            raise LtsError(f"unknown action kind {self.kind!r}")

    @property
    def visible(self) -> bool:
        return self.kind != "tau"

    def sort_key(self):
        return (self.kind, self.thread, self.method, value_key(self.value))

    def __lt__(self, other: "ActionLabel") -> bool:
        return self.sort_key() < other.sort_key()

    @classmethod
    def call(cls, thread: int, method: str, arg: Value = None) -> "ActionLabel":
        return cls("call", thread, method, arg)

    @classmethod
    def ret(cls, thread: int, method: str, val: Value = None) -> "ActionLabel":
        return cls("ret", thread, method, val)

    def __str__(self):
        if self.kind == "tau":
            return "i"
        v = "" if self.value is None else str(self.value)
        if self.kind == "call":
            return f"call{self.thread}.{self.method}({v})"
        return f"ret{self.thread}.{self.method}({v})"


TAU = ActionLabel("tau")

Transition = Tuple[int, ActionLabel, int]


@contextmanager
def paused_gc():
    """Suspend the cyclic collector while building large acyclic structures."""
    was = gc.isenabled()
    gc.disable()
    try:
        yield
    finally:
        if was:
            gc.enable()


class Lts:
    """Finite LTS with states ``0..num_states-1`` and a distinguished initial state.

    Transitions keep their construction order; ``out(s)`` gives the outgoing
    ``(label, dst)`` pairs of ``s`` in that same order.
    """

    __slots__ = ("num_states", "initial", "transitions", "_out")

    def __init__(self, num_states: int, initial: int, transitions: Iterable[Transition]):
        if num_states < 1:
            raise LtsError("an LTS has at least one state")
        if not 0 <= initial < num_states:
            raise LtsError(f"initial state {initial} out of range 0..{num_states - 1}")
        trans = tuple(transitions)
        for i, (src, label, dst) in enumerate(trans):
            if not (0 <= src < num_states and 0 <= dst < num_states):
                raise LtsError(f"transition {i} ({src} -> {dst}) has an invalid endpoint")
            if not isinstance(label, ActionLabel):
                raise LtsError(f"transition {i} has a non-ActionLabel label {label!r}")
        self.num_states = num_states
        self.initial = initial
        self.transitions = trans
        self._out = None

    @classmethod
    def _trusted(cls, num_states: int, initial: int, transitions: tuple) -> "Lts":
        """Build without validation, for inputs derived from valid LTSs."""
        lts = cls.__new__(cls)
        lts.num_states = num_states
        lts.initial = initial
        lts.transitions = transitions
        lts._out = None
        return lts

    def out(self, state: int) -> Tuple[Tuple[ActionLabel, int], ...]:
        if self._out is None:
            out = [[] for _ in range(self.num_states)]
            for src, label, dst in self.transitions:
                out[src].append((label, dst))
            self._out = tuple(tuple(o) for o in out)
        return self._out[state]

    @property
    def num_transitions(self) -> int:
        return len(self.transitions)

    def labels(self) -> set:
        return {lab for _, lab, _ in self.transitions}

    def __eq__(self, other):
        if not isinstance(other, Lts):
            return NotImplemented
        return (self.num_states == other.num_states and self.initial == other.initial
                and self.transitions == other.transitions)

    def __hash__(self):
        return hash((self.num_states, self.initial, self.transitions))

    def __repr__(self):
        return (f"Lts(num_states={self.num_states}, initial={self.initial}, "
                f"transitions={self.num_transitions})")


def make_lts(num_states: int, initial: int, transitions: Sequence[Transition]) -> Lts:
    return Lts(num_states, initial, transitions)


def disjoint_union(a: Lts, b: Lts) -> Tuple[Lts, int]:
    """Place ``b`` after ``a``; returns the union and the offset of ``b``'s states.

    The union's initial state is ``a.initial``; ``b``'s is ``b.initial + offset``.
    """
    offset = a.num_states
    trans = list(a.transitions)
    trans.extend((s + offset, lab, d + offset) for s, lab, d in b.transitions)
    return Lts._trusted(a.num_states + b.num_states, a.initial, tuple(trans)), offset


def reachable(lts: Lts) -> Lts:
    """Restrict to states reachable from the initial one, renumbered in BFS order."""
    order = {lts.initial: 0}
    queue = deque([lts.initial])
    trans = []
    while queue:
        s = queue.popleft()
        for label, d in lts.out(s):
            if d not in order:
                order[d] = len(order)
                queue.append(d)
            trans.append((order[s], label, order[d]))
    return Lts(len(order), 0, trans)


# ---------------------------------------------------------------- .aut format

def encode_label(label: ActionLabel) -> str:
    if label.kind == "tau":
        return "i"
    v = "NONE" if label.value is None else str(label.value)
    return f"{label.kind.upper()} !T{label.thread} !{label.method.upper()} !{v}"


_LABEL_RE = re.compile(r"^(CALL|RET) !T([0-9]+) !([A-Z_][A-Z0-9_]*) !(NONE|EMPTY|-?[0-9]+)$")


def decode_label(text: str) -> ActionLabel:
    if text == "i":
        return TAU
    m = _LABEL_RE.match(text)
    if not m:
        raise LtsError(f"unknown label encoding {text!r}")
    kind, thread, method, val = m.groups()
    value: Value
    if val == "NONE":
        value = None
    elif val == EMPTY:
        value = EMPTY
    else:
        value = int(val)
    return ActionLabel(kind.lower(), int(thread), method.lower(), value)


def write_aut(lts: Lts) -> str:
    lines = [f"des ({lts.initial}, {lts.num_transitions}, {lts.num_states})"]
    lines.extend(f'({s}, "{encode_label(lab)}", {d})' for s, lab, d in lts.transitions)
    return "\n".join(lines) + "\n"


_HEADER_RE = re.compile(r"^des\s*\(\s*([0-9]+)\s*,\s*([0-9]+)\s*,\s*([0-9]+)\s*\)$")
_EDGE_RE = re.compile(r'^\(\s*([0-9]+)\s*,\s*"([^"]*)"\s*,\s*([0-9]+)\s*\)$')


def read_aut(text: str) -> Lts:
    lines = text.splitlines()
    if not lines:
        raise AutParseError(1, "missing 'des' header")
    header = _HEADER_RE.match(lines[0].strip())
    if not header:
        raise AutParseError(1, f"malformed header {lines[0]!r}")
    initial, ntrans, nstates = map(int, header.groups())
    trans = []
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line:
            continue
        m = _EDGE_RE.match(line)
        if not m:
            raise AutParseError(lineno, f"malformed transition {raw!r}")
        try:
            label = decode_label(m.group(2))
        except LtsError as exc:
            raise AutParseError(lineno, str(exc)) from None
        trans.append((int(m.group(1)), label, int(m.group(3))))
    if len(trans) != ntrans:
        raise AutParseError(1, f"header announces {ntrans} transitions, found {len(trans)}")
    try:
        return Lts(nstates, initial, trans)
    except LtsError as exc:
        raise AutParseError(1, str(exc)) from None


# ---------------------------------------------------------------- witnesses

@dataclass(frozen=True)
class Witness:
    """An execution fragment, optionally closing into a cycle (a lasso).

    ``prefix`` lists ``(state, label)`` steps starting at ``start``; the step
    ``(s, a)`` leaves ``s`` by ``a``. ``last`` is the state reached after the
    prefix. A non-empty ``cycle`` starts at ``last`` and returns to it.
    """

    start: int
    prefix: Tuple[Tuple[int, ActionLabel], ...] = ()
    last: Optional[int] = None
    cycle: Tuple[Tuple[int, ActionLabel], ...] = ()
    note: str = field(default="", compare=False)

    def __post_init__(self):
        if self.last is None:
            object.__setattr__(self, "last", self.start)

    @property
    def is_lasso(self) -> bool:
        return bool(self.cycle)

    def states(self):
        return [s for s, _ in self.prefix] + [self.last] + [s for s, _ in self.cycle[1:]]

    def visible_trace(self):
        return [lab for _, lab in self.prefix + self.cycle if lab.visible]

    def replays_on(self, lts: Lts) -> bool:
        """Check every step is a real transition of ``lts``."""
        steps = list(self.prefix)
        ends = [s for s, _ in steps[1:]] + [self.last]
        if steps and steps[0][0] != self.start:
            return False
        if not steps and self.last != self.start:
            return False
        for (s, lab), d in zip(steps, ends):
            if (lab, d) not in lts.out(s):
                return False
        if self.cycle:
            cyc = list(self.cycle)
            if cyc[0][0] != self.last:
                return False
            cends = [s for s, _ in cyc[1:]] + [self.last]
            for (s, lab), d in zip(cyc, cends):
                if (lab, d) not in lts.out(s):
                    return False
        return True

    def shifted(self, delta: int) -> "Witness":
        return Witness(self.start + delta,
                       tuple((s + delta, a) for s, a in self.prefix),
                       self.last + delta,
                       tuple((s + delta, a) for s, a in self.cycle),
                       self.note)
