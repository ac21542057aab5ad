"""Brute-force linearizability checking of histories.

A history is linearizable when some completion of it (each pending call
either dropped or given a return value) can be ordered into a legal
sequential run of the specification, respecting each thread's order and the
real-time order between non-overlapping operations.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterable, Iterator, List, Optional, Tuple

from .lts import EMPTY, ActionLabel, Lts, value_key


class MalformedHistory(ValueError):
    pass


@dataclass(frozen=True)
class Event:
    thread: int
    kind: str          # "call" | "ret"
    method: str
    value: object = None

    @classmethod
    def from_label(cls, label: ActionLabel) -> "Event":
        if not label.visible:
            raise ValueError("tau has no history event")
        return cls(label.thread, label.kind, label.method, label.value)

    def __lt__(self, other: "Event") -> bool:
        return ((self.thread, self.kind, self.method, value_key(self.value))
                < (other.thread, other.kind, other.method, value_key(other.value)))

    def __str__(self):
        v = "" if self.value is None else self.value
        if self.kind == "call":
            return f"call{self.thread}.{self.method}({v})"
        return f"ret{self.thread}.{self.method}({v})"


History = Tuple[Event, ...]


def check_well_formed(h: History) -> None:
    """Raise unless each thread alternates call and matching ret, starting with a call."""
    open_call: Dict[int, Event] = {}
    for i, e in enumerate(h):
        if e.kind == "call":
            if e.thread in open_call:
                raise MalformedHistory(f"event {i}: thread {e.thread} calls while a call is pending")
            open_call[e.thread] = e
        elif e.kind == "ret":
            c = open_call.pop(e.thread, None)
            if c is None or c.method != e.method:
                raise MalformedHistory(f"event {i}: return without a matching call")
        else:
            raise MalformedHistory(f"event {i}: unknown kind {e.kind!r}")


def pending_calls(h: History) -> List[int]:
    """Indices of calls without a return."""
    open_call: Dict[int, int] = {}
    for i, e in enumerate(h):
        if e.kind == "call":
            open_call[e.thread] = i
        else:
            open_call.pop(e.thread, None)
    return sorted(open_call.values())


# ------------------------------------------------------------ specifications

class SeqSpec:
    """An executable sequential object.

    ``apply(state, method, arg)`` returns ``(new_state, return_value)`` or
    None when the method is not defined there.
    """

    def __init__(self, name: str, initial, apply: Callable, return_domain: Callable):
        self.name = name
        self.initial = initial
        self.apply = apply
        self._return_domain = return_domain

    def return_domain(self, method: str, values: int) -> Tuple[object, ...]:
        """Every value ``method`` may return when arguments range over 1..values."""
        return self._return_domain(method, values)

    def __repr__(self):
        return f"SeqSpec({self.name!r})"


def _stack_apply(state, method, arg):
    if method == "push":
        return state + (arg,), None
    if method == "pop":
        return (state, EMPTY) if not state else (state[:-1], state[-1])
    return None


def _stack_returns(method, values):
    if method == "pop":
        return tuple(range(1, values + 1)) + (EMPTY,)
    return (None,)


def _counter_apply(state, method, arg):
    if method == "inc":
        return state + 1, None
    if method == "dec":
        return state - 1, None
    return None


STACK = SeqSpec("stack", (), _stack_apply, _stack_returns)
COUNTER = SeqSpec("counter", 0, _counter_apply, lambda method, values: (None,))
SEQ_SPECS = {"stack": STACK, "counter": COUNTER}


# ------------------------------------------------------------ histories

def _tau_closure(lts: Lts, states) -> FrozenSet[int]:
    seen = set(states)
    stack = list(seen)
    while stack:
        s = stack.pop()
        for lab, d in lts.out(s):
            if not lab.visible and d not in seen:
                seen.add(d)
                stack.append(d)
    return frozenset(seen)


class _TraceTree:
    """The determinized visible-trace tree of an LTS, expanded lazily."""

    def __init__(self, lts: Lts):
        self.lts = lts
        self.root = _tau_closure(lts, [lts.initial])
        self._children: Dict[FrozenSet[int], Tuple[Tuple[Event, FrozenSet[int]], ...]] = {}

    def children(self, macro):
        got = self._children.get(macro)
        if got is None:
            targets: Dict[ActionLabel, List[int]] = {}
            for s in macro:
                for lab, d in self.lts.out(s):
                    if lab.visible:
                        targets.setdefault(lab, []).append(d)
            got = tuple((Event.from_label(lab), _tau_closure(self.lts, ds))
                        for lab, ds in sorted(targets.items()))
            self._children[macro] = got
        return got

    def walk(self, max_events: int, leaves_only: bool) -> Iterator[History]:
        stack = [(self.root, ())]
        while stack:
            macro, h = stack.pop()
            kids = self.children(macro) if len(h) < max_events else ()
            if not leaves_only or not kids:
                yield h
            for ev, child in reversed(kids):
                stack.append((child, h + (ev,)))


def histories(lts: Lts, max_events: int) -> set:
    """All visible event sequences of at most ``max_events`` events."""
    return set(_TraceTree(lts).walk(max_events, leaves_only=False))


def completions(h: History, spec: SeqSpec = STACK, values: int = 1) -> set:
    """Every completion of ``h``: each pending call is dropped or returns
    some value from the method's return domain."""
    pending = pending_calls(h)
    choices = []
    for i in pending:
        call = h[i]
        opts = [None] + [Event(call.thread, "ret", call.method, v)
                         for v in spec.return_domain(call.method, values)]
        choices.append(opts)
    result = set()
    for pick in itertools.product(*choices):
        drop = {i for i, p in zip(pending, pick) if p is None}
        body = tuple(e for j, e in enumerate(h) if j not in drop)
        result.add(body + tuple(p for p in pick if p is not None))
    return result


# ------------------------------------------------------------ checking

@dataclass(frozen=True)
class LinResult:
    ok: bool
    linearization: Optional[History] = None


def _operations(h: History):
    """(call event, ret event, call index, ret index) per operation."""
    open_call: Dict[int, int] = {}
    ops = []
    for i, e in enumerate(h):
        if e.kind == "call":
            open_call[e.thread] = i
        else:
            c = open_call.pop(e.thread)
            ops.append((h[c], e, c, i))
    ops.sort(key=lambda op: op[2])
    return ops


def check_lin(h: History, spec: SeqSpec) -> LinResult:
    """Decide whether the complete history ``h`` is linearizable.

    The witness is the sequential history of the chosen order.
    """
    check_well_formed(h)
    if pending_calls(h):
        raise MalformedHistory("history has pending calls; check a completion instead")
    ops = _operations(h)
    n = len(ops)
    # must[i]: bitmask of operations that returned before op i was called.
    must = [0] * n
    for i, (_, _, ci, _) in enumerate(ops):
        for j, (_, _, _, rj) in enumerate(ops):
            if rj < ci:
                must[i] |= 1 << j
    full = (1 << n) - 1
    failed = set()
    order: List[int] = []

    def search(done: int, state) -> bool:
        if done == full:
            return True
        key = (done, state)
        if key in failed:
            return False
        for i in range(n):
            bit = 1 << i
            if done & bit or must[i] & ~done:
                continue
            call, ret, _, _ = ops[i]
            res = spec.apply(state, call.method, call.value)
            if res is None or res[1] != ret.value:
                continue
            order.append(i)
            if search(done | bit, res[0]):
                return True
            order.pop()
        failed.add(key)
        return False

    if not search(0, spec.initial):
        return LinResult(False)
    seq = []
    for i in order:
        call, ret, _, _ = ops[i]
        seq.extend((call, ret))
    return LinResult(True, tuple(seq))


def is_linearizable(h: History, spec: SeqSpec, values: int = 1) -> bool:
    """True when some completion of ``h`` passes :func:`check_lin`."""
    return any(check_lin(c, spec).ok for c in sorted(completions(h, spec, values)))


@dataclass(frozen=True)
class OracleResult:
    ok: bool
    failing_history: Optional[History]
    checked: int


def check_object_lin(lts: Lts, spec: SeqSpec, max_events: int, values: int = 1) -> OracleResult:
    """Check every history of ``lts`` up to ``max_events`` events.

    Linearizability is prefix-closed, so only maximal histories are checked;
    on failure the shortest failing prefix of the first failing one (in
    depth-first order) is reported.
    """
    checked = 0
    for h in _TraceTree(lts).walk(max_events, leaves_only=True):
        checked += 1
        if not is_linearizable(h, spec, values):
            for cut in range(len(h) + 1):
                if not is_linearizable(h[:cut], spec, values):
                    return OracleResult(False, h[:cut], checked)
    return OracleResult(True, None, checked)


def default_max_events(threads: int, ops: int) -> int:
    return 2 * threads * ops
