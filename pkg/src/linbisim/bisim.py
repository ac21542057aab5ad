"""Branching bisimulation, optionally divergence-sensitive, by signature refinement.

The partition starts with one block. Each round computes, for every state,
the set of ``(label, target block)`` pairs it can reach after a sequence of
inert tau steps (tau steps that stay inside its block), excluding inert tau
steps themselves. With divergence sensitivity the signature also records
whether the state can tau-reach, inside its block, a tau cycle lying wholly
inside the block. Blocks are split by signature until nothing changes.
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .lts import ActionLabel, Lts, Witness, disjoint_union, paused_gc


class ContractError(ValueError):
    pass


class SpecNotLockFree(ValueError):
    """The specification has a reachable tau cycle, so it is not a valid
    atomic specification."""

    def __init__(self, witness: Witness):
        super().__init__("specification has a reachable tau cycle")
        self.witness = witness


@dataclass(frozen=True)
class Partition:
    block_of: Tuple[int, ...]
    blocks: Tuple[Tuple[int, ...], ...]

    @classmethod
    def from_block_of(cls, block_of: Sequence[int]) -> "Partition":
        blocks: List[List[int]] = [[] for _ in range(max(block_of) + 1)] if block_of else []
        for s, b in enumerate(block_of):
            blocks[b].append(s)
        return cls(tuple(block_of), tuple(tuple(b) for b in blocks))

    def same_block(self, s: int, t: int) -> bool:
        return self.block_of[s] == self.block_of[t]

    def __len__(self):
        return len(self.blocks)


@dataclass(frozen=True)
class Verdict:
    equivalent: bool
    witness: Optional[Witness]
    divergence_used: bool
    union: Optional[Lts] = field(default=None, compare=False, repr=False)
    offset: int = field(default=0, compare=False)
    partition: Optional[Partition] = field(default=None, compare=False, repr=False)
    seconds: float = field(default=0.0, compare=False)


class _Graph:
    """Integer view of an LTS: label ids (0 is tau) and adjacency lists."""

    def __init__(self, lts: Lts):
        self.lts = lts
        self.n = lts.num_states
        ids: Dict[ActionLabel, int] = {}
        labels: List[Optional[ActionLabel]] = [None]
        out: List[List[Tuple[int, int]]] = [[] for _ in range(self.n)]
        tau_out: List[List[int]] = [[] for _ in range(self.n)]
        for s, lab, d in lts.transitions:
            if lab.visible:
                lid = ids.get(lab)
                if lid is None:
                    lid = ids[lab] = len(labels)
                    labels.append(lab)
                out[s].append((lid, d))
            else:
                out[s].append((0, d))
                tau_out[s].append(d)
        self.labels = labels
        self.out = out
        self.tau_out = tau_out


def _inert_sccs(g: _Graph, block: Sequence[int], roots=None):
    """Tarjan's algorithm on inert tau edges.

    Returns ``(comp, order, cyclic)``: the component of each state, the
    components in emission order (every component after all components it
    reaches), and whether each component contains an inert cycle.
    """
    n = g.n
    tau_out = g.tau_out
    index = [-1] * n
    low = [0] * n
    comp = [-1] * n
    on_stack = [False] * n
    stack: List[int] = []
    order: List[List[int]] = []
    cyclic: List[bool] = []
    counter = 0
    for root in (range(n) if roots is None else roots):
        if index[root] >= 0:
            continue
        work = [(root, 0)]
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack[root] = True
        while work:
            v, i = work[-1]
            succ = tau_out[v]
            bv = block[v]
            pushed = False
            while i < len(succ):
                w = succ[i]
                i += 1
                if block[w] != bv:
                    continue
                if index[w] < 0:
                    work[-1] = (v, i)
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack[w] = True
                    work.append((w, 0))
                    pushed = True
                    break
                if on_stack[w] and index[w] < low[v]:
                    low[v] = index[w]
            if pushed:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                cid = len(order)
                members = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp[w] = cid
                    members.append(w)
                    if w == v:
                        break
                order.append(members)
                cyc = len(members) > 1 or any(w == v for w in tau_out[v])
                cyclic.append(cyc)
    return comp, order, cyclic


def _tau_sccs(g: _Graph):
    """Tau-SCCs in emission order, like ``_inert_sccs`` with one block.

    States that cannot reach a tau cycle are peeled off sink-first, which is
    cheaper; Tarjan's algorithm handles the rest.
    """
    n = g.n
    tau_out = g.tau_out
    pending = [len(set(ts)) for ts in tau_out]
    tau_in: List[List[int]] = [[] for _ in range(n)]
    for s in range(n):
        for d in set(tau_out[s]):
            tau_in[d].append(s)
    comp = [-1] * n
    order: List[List[int]] = []
    stack = [s for s in range(n) if pending[s] == 0]
    while stack:
        s = stack.pop()
        comp[s] = len(order)
        order.append([s])
        for p in tau_in[s]:
            pending[p] -= 1
            if pending[p] == 0:
                stack.append(p)
    cyclic = [False] * len(order)
    rest = [s for s in range(n) if comp[s] < 0]
    if rest:
        mask = [0 if comp[s] < 0 else -1 for s in range(n)]
        rcomp, rorder, rcyclic = _inert_sccs(g, mask, rest)
        base = len(order)
        for members in rorder:
            for s in members:
                comp[s] = base + rcomp[s]
        order.extend(rorder)
        cyclic.extend(rcyclic)
    return comp, order, cyclic


def _refine(g: _Graph, divergence: bool):
    """Signature refinement; returns a block id per state.

    Tau cycles are collapsed first (their states are always equivalent, and
    a collapsed cycle keeps its divergence). Block ids stay stable across
    rounds: when a block splits, its largest part keeps the id. Only states
    whose signature may have changed are recomputed.
    """
    comp, order, cyclic = _tau_sccs(g)
    m = len(order)
    out: List[List[Tuple[int, int]]] = [[] for _ in range(m)]
    preds: List[List[int]] = [[] for _ in range(m)]
    tau_preds: List[List[int]] = [[] for _ in range(m)]
    for c, members in enumerate(order):
        seen = set()
        for s in members:
            for lid, d in g.out[s]:
                cd = comp[d]
                if (lid == 0 and cd == c) or (lid, cd) in seen:
                    continue
                seen.add((lid, cd))
                out[c].append((lid, cd))
                preds[cd].append(c)
                if lid == 0:
                    tau_preds[cd].append(c)
    # Components come out of Tarjan's algorithm after everything they
    # reach, so one forward pass sees inert successors first.
    mult = m + 1
    block = [0] * m
    members_of: Dict[int, List[int]] = {0: list(range(m))}
    sig: List[Optional[frozenset]] = [None] * m
    div = [False] * m
    dirty = [True] * m
    while True:
        touched = set()
        for c in range(m):
            if not dirty[c]:
                continue
            dirty[c] = False
            bc = block[c]
            acc = set()
            dv = cyclic[c]
            for lid, d in out[c]:
                bd = block[d]
                if lid == 0 and bd == bc:
                    acc |= sig[d]
                    if div[d]:
                        dv = True
                else:
                    acc.add(lid * mult + bd)
            if not divergence:
                dv = False
            fs = frozenset(acc)
            if fs != sig[c] or dv != div[c]:
                sig[c] = fs
                div[c] = dv
                touched.add(bc)
                for p in tau_preds[c]:
                    if block[p] == bc:
                        dirty[p] = True
        split = False
        for b in sorted(touched):
            groups: Dict[tuple, List[int]] = {}
            for c in members_of[b]:
                groups.setdefault((sig[c], div[c]), []).append(c)
            if len(groups) == 1:
                continue
            split = True
            parts = sorted(groups.values(), key=lambda x: (-len(x), x[0]))
            members_of[b] = parts[0]
            for part in parts[1:]:
                nb = len(members_of)
                members_of[nb] = part
                for c in part:
                    block[c] = nb
                    dirty[c] = True
                    for p in preds[c]:
                        dirty[p] = True
        if not split:
            break
    ids: Dict[int, int] = {}
    result = []
    for s in range(g.n):
        b = block[comp[s]]
        result.append(ids.setdefault(b, len(ids)))
    return result, len(ids)


def coarsest_partition(lts: Lts, divergence: bool = False) -> Partition:
    """The coarsest (divergence-sensitive) branching bisimulation on ``lts``.

    Blocks are numbered by the smallest state they contain.
    """
    block, _ = _refine(_Graph(lts), divergence)
    return Partition.from_block_of(block)


def _divergent_states(g: _Graph, block: Sequence[int]) -> List[bool]:
    comp, order, cyclic = _inert_sccs(g, block)
    comp_div = [False] * len(order)
    for cid, members in enumerate(order):
        div = cyclic[cid]
        if not div:
            for s in members:
                for d in g.tau_out[s]:
                    if block[d] == block[s] and comp[d] != cid and comp_div[comp[d]]:
                        div = True
                        break
                if div:
                    break
        comp_div[cid] = div
    return [comp_div[comp[s]] for s in range(g.n)]


def mark_divergent(lts: Lts, partition: Partition) -> Set[int]:
    """States with an infinite tau path that never leaves their block."""
    flags = _divergent_states(_Graph(lts), partition.block_of)
    return {s for s, f in enumerate(flags) if f}


# ------------------------------------------------------------------ witnesses

def _bfs_path(g: _Graph, start: int, goal, allowed):
    """Shortest path from ``start`` to a state satisfying ``goal``.

    ``allowed(s, lid, d)`` filters the edges that may be used. Returns the
    list of ``(state, label)`` steps and the final state, or None.
    """
    if goal(start):
        return [], start
    parent = {start: None}
    queue = deque([start])
    while queue:
        s = queue.popleft()
        for lid, d in g.out[s]:
            if d in parent or not allowed(s, lid, d):
                continue
            parent[d] = (s, lid)
            if goal(d):
                steps = []
                cur = d
                while parent[cur] is not None:
                    p, l = parent[cur]
                    steps.append((p, l))
                    cur = p
                steps.reverse()
                return steps, d
            queue.append(d)
    return None


def _to_labels(g: _Graph, steps):
    from .lts import TAU
    return tuple((s, TAU if lid == 0 else g.labels[lid]) for s, lid in steps)


def _tau_cycle_from(g: _Graph, s: int, inside) -> List[Tuple[int, int]]:
    """Shortest tau cycle through ``s`` using only states accepted by ``inside``."""
    for d in g.tau_out[s]:
        if d == s:
            return [(s, 0)]
    found = _bfs_path_to(g, s, s, lambda a, lid, b: lid == 0 and inside(b))
    return found


def _bfs_path_to(g, start, target, allowed):
    parent = {}
    queue = deque()
    for lid, d in g.out[start]:
        if allowed(start, lid, d) and d not in parent:
            parent[d] = (start, lid)
            if d == target:
                return [(start, lid)]
            queue.append(d)
    while queue:
        s = queue.popleft()
        for lid, d in g.out[s]:
            if d in parent or not allowed(s, lid, d):
                continue
            parent[d] = (s, lid)
            if d == target:
                steps = []
                cur = d
                while True:
                    p, l = parent[cur]
                    steps.append((p, l))
                    if p == start:
                        break
                    cur = p
                steps.reverse()
                return steps
            queue.append(d)
    return None


def _inert_lasso(g: _Graph, block, s: int):
    """From ``s``, an in-block tau path to an in-block tau cycle."""
    comp, order, cyclic = _inert_sccs(g, block)
    b = block[s]
    on_cycle = lambda x: cyclic[comp[x]]
    found = _bfs_path(g, s, on_cycle,
                      lambda a, lid, d: lid == 0 and block[d] == b)
    if found is None:
        return None
    steps, c = found
    cycle = _tau_cycle_from(g, c, lambda x: block[x] == b and comp[x] == comp[c])
    return steps, c, cycle


class _Closure:
    """Memoized tau closures and weak visible successors."""

    def __init__(self, g: _Graph):
        self.g = g
        self._tau: Dict[int, Tuple[int, ...]] = {}
        self._weak_labels: Dict[int, frozenset] = {}

    def tau(self, s: int) -> Tuple[int, ...]:
        got = self._tau.get(s)
        if got is None:
            seen = {s}
            order = [s]
            i = 0
            while i < len(order):
                for d in self.g.tau_out[order[i]]:
                    if d not in seen:
                        seen.add(d)
                        order.append(d)
                i += 1
            got = self._tau[s] = tuple(order)
        return got

    def weak_labels(self, s: int) -> frozenset:
        got = self._weak_labels.get(s)
        if got is None:
            got = frozenset(lid for x in self.tau(s) for lid, _ in self.g.out[x] if lid)
            self._weak_labels[s] = got
        return got

    def weak_succ(self, s: int, lid: int) -> List[int]:
        res = []
        seen = set()
        for x in self.tau(s):
            for l, d in self.g.out[x]:
                if l == lid and d not in seen:
                    seen.add(d)
                    res.append(d)
        return res


def _distinguish(g: _Graph, block, div_flags, init_a: int, init_b: int,
                 divergence: bool, guide=None) -> Witness:
    closure = _Closure(g)
    nblocks = max(block) + 1
    block_div = [False] * nblocks
    for s, f in enumerate(div_flags):
        if f:
            block_div[block[s]] = True

    def visible_mismatch(s, t):
        missing = closure.weak_labels(s) - closure.weak_labels(t)
        if not missing:
            return None
        lid = min(missing)
        found = _bfs_path(g, s, lambda x: any(l == lid for l, _ in g.out[x]),
                          lambda a, l, d: l == 0)
        steps, x = found
        d = next(d for l, d in g.out[x] if l == lid)
        return steps + [(x, lid)], d

    # BFS over (leader, follower) pairs; the leader's moves form the witness.
    parent: Dict[Tuple[int, int], Optional[Tuple[Tuple[int, int], int, int]]] = {}
    queue = deque()
    for pair in ((init_a, init_b), (init_b, init_a)):
        if pair not in parent:
            parent[pair] = None
            queue.append(pair)

    def leader_path(pair):
        steps = []
        cur = pair
        while parent[cur] is not None:
            prev, s, lid = parent[cur]
            steps.append((s, lid))
            cur = prev
        steps.reverse()
        return cur[0], steps

    while queue:
        pair = queue.popleft()
        s, t = pair
        if divergence and div_flags[s] and not block_div[block[t]]:
            start, steps = leader_path(pair)
            lasso = _inert_lasso(g, block, s)
            if lasso is not None:
                more, c, cycle = lasso
                return Witness(start, _to_labels(g, steps + more), c, _to_labels(g, cycle),
                               note="divergence")
        mismatch = None if guide and guide[s] == guide[t] else visible_mismatch(s, t)
        if mismatch is not None:
            start, steps = leader_path(pair)
            more, end = mismatch
            return Witness(start, _to_labels(g, steps + more), end, note="visible")
        for lid, s2 in g.out[s]:
            if lid == 0 and block[s2] == block[s]:
                replies = [t]
            elif lid == 0:
                replies = closure.tau(t)
                if any(block[r] == block[s2] for r in replies):
                    continue
            else:
                replies = closure.weak_succ(t, lid)
                if any(block[r] == block[s2] for r in replies):
                    continue
            if guide:
                # The follower answers within the coarser relation when it can.
                close = [r for r in replies if guide[r] == guide[s2]]
                replies = close or replies
            for t2 in replies:
                nxt = (s2, t2)
                if block[s2] != block[t2] and nxt not in parent:
                    parent[nxt] = (pair, s, lid)
                    queue.append(nxt)

    # Trace-level search found nothing: fall back to a signature difference
    # at the roots.
    for x, y in ((init_a, init_b), (init_b, init_a)):
        sig_y = set()
        for z in closure.tau(y):
            if block[z] == block[y]:
                sig_y.update((lid, block[d]) for lid, d in g.out[z]
                             if not (lid == 0 and block[d] == block[z]))
        b = block[x]
        found = _bfs_path(
            g, x,
            lambda z: any((lid, block[d]) not in sig_y and not (lid == 0 and block[d] == b)
                          for lid, d in g.out[z]),
            lambda a, lid, d: lid == 0 and block[d] == b)
        if found is not None:
            steps, z = found
            lid, d = next((lid, d) for lid, d in g.out[z]
                          if (lid, block[d]) not in sig_y and not (lid == 0 and block[d] == b))
            return Witness(x, _to_labels(g, steps + [(z, lid)]), d, note="branching")
    return Witness(init_a, note="branching")


def distinguish(union: Lts, partition: Partition, init_a: int, init_b: int,
                divergence: bool) -> Witness:
    """A replayable path explaining why ``init_a`` and ``init_b`` differ.

    When only divergence separates the two states, the follower is kept
    inside the plain branching bisimulation so the result is a lasso.
    """
    if partition.same_block(init_a, init_b):
        raise ContractError("initial states are equivalent; nothing to distinguish")
    g = _Graph(union)
    block = partition.block_of
    flags = _divergent_states(g, block) if divergence else [False] * g.n
    guide = None
    if divergence:
        plain, _ = _refine(g, False)
        if plain[init_a] == plain[init_b]:
            guide = plain
    return _distinguish(g, block, flags, init_a, init_b, divergence, guide)


def equivalent(a: Lts, b: Lts, divergence: bool = False) -> Verdict:
    """Compare initial states of ``a`` and ``b`` in their disjoint union."""
    start = time.perf_counter()
    with paused_gc():
        union, offset = disjoint_union(a, b)
        partition = coarsest_partition(union, divergence)
        init_b = b.initial + offset
        same = partition.same_block(a.initial, init_b)
        witness = None if same else distinguish(union, partition, a.initial, init_b,
                                                divergence)
    return Verdict(same, witness, divergence, union, offset, partition,
                   time.perf_counter() - start)


# ------------------------------------------------------------------ progress

def tau_lasso(lts: Lts) -> Optional[Witness]:
    """Shortest path to a reachable tau cycle, closed into a lasso; None if none."""
    g = _Graph(lts)
    comp, order, cyclic = _inert_sccs(g, [0] * g.n)
    found = _bfs_path(g, lts.initial, lambda x: cyclic[comp[x]], lambda a, lid, d: True)
    if found is None:
        return None
    steps, c = found
    cycle = _tau_cycle_from(g, c, lambda x: comp[x] == comp[c])
    return Witness(lts.initial, _to_labels(g, steps), c, _to_labels(g, cycle), note="tau cycle")


def spec_lockfree_sanity(spec: Lts) -> Optional[Witness]:
    """None when ``spec`` has no reachable tau cycle, else the offending lasso."""
    return tau_lasso(spec)


@dataclass(frozen=True)
class ObjectReport:
    """Outcome of checking an implementation against its atomic specification.

    ``linearizable`` is True or None (not established); ``lock_free`` is
    True, False (refuted by a divergence the specification lacks) or None.
    """

    linearizable: Optional[bool]
    lock_free: Optional[bool]
    div_verdict: Verdict
    bisim_verdict: Optional[Verdict]
    witness: Optional[Witness]

    @property
    def summary(self) -> str:
        if self.linearizable and self.lock_free:
            return "linearizable and lock-free"
        if self.linearizable:
            return "linearizable; lock-freedom refuted by a divergence"
        return "linearizability and lock-freedom not established"


def verify_object(impl: Lts, spec: Lts) -> ObjectReport:
    lasso = spec_lockfree_sanity(spec)
    if lasso is not None:
        raise SpecNotLockFree(lasso)
    div = equivalent(impl, spec, divergence=True)
    if div.equivalent:
        return ObjectReport(True, True, div, None, None)
    plain = equivalent(impl, spec, divergence=False)
    if plain.equivalent:
        return ObjectReport(True, False, div, plain, div.witness)
    return ObjectReport(None, None, div, plain, plain.witness)
