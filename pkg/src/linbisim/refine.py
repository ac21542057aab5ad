"""Trace refinement by on-the-fly subset construction of the specification."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Tuple

from .lts import ActionLabel, Lts, paused_gc


@dataclass(frozen=True)
class RefinementResult:
    holds: bool
    counterexample: Optional[Tuple[ActionLabel, ...]] = None
    pairs: int = field(default=0, compare=False)
    seconds: float = field(default=0.0, compare=False)


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


def traces_refine(impl: Lts, spec: Lts) -> RefinementResult:
    """Check that every visible trace of ``impl`` is a trace of ``spec``.

    Explores pairs of an implementation state and a tau-closed set of
    specification states breadth first, so the counterexample comes from a
    shortest offending path.
    """
    with paused_gc():
        return _traces_refine(impl, spec)


def _traces_refine(impl: Lts, spec: Lts) -> RefinementResult:
    start = time.perf_counter()
    succ_memo: Dict[Tuple[int, ActionLabel], Optional[int]] = {}
    macro_ids: Dict[FrozenSet[int], int] = {}
    macros: List[FrozenSet[int]] = []

    def intern(m: FrozenSet[int]) -> int:
        i = macro_ids.get(m)
        if i is None:
            i = macro_ids[m] = len(macros)
            macros.append(m)
        return i

    def after(mid: int, lab: ActionLabel) -> Optional[int]:
        key = (mid, lab)
        if key in succ_memo:
            return succ_memo[key]
        targets = [d for s in macros[mid] for l, d in spec.out(s) if l == lab]
        res = intern(_tau_closure(spec, targets)) if targets else None
        succ_memo[key] = res
        return res

    root = (impl.initial, intern(_tau_closure(spec, [spec.initial])))
    parent: Dict[Tuple[int, int], Optional[Tuple[Tuple[int, int], ActionLabel]]] = {root: None}
    queue = deque([root])
    while queue:
        pair = queue.popleft()
        s, mid = pair
        for lab, d in impl.out(s):
            if lab.visible:
                nmid = after(mid, lab)
                if nmid is None:
                    trace = [lab]
                    cur = pair
                    while parent[cur] is not None:
                        cur, l = parent[cur]
                        if l.visible:
                            trace.append(l)
                    trace.reverse()
                    return RefinementResult(False, tuple(trace), len(parent),
                                            time.perf_counter() - start)
            else:
                nmid = mid
            nxt = (d, nmid)
            if nxt not in parent:
                parent[nxt] = (pair, lab)
                queue.append(nxt)
    return RefinementResult(True, None, len(parent), time.perf_counter() - start)


def linearizable_by_refinement(impl: Lts, spec: Lts) -> RefinementResult:
    """Linearizability of ``impl`` against the atomic specification ``spec``.

    With an atomic specification object, linearizability coincides with
    trace refinement, so this is :func:`traces_refine` under another name;
    ``seconds`` times the check alone.
    """
    return traces_refine(impl, spec)
