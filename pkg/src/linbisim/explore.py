"""Breadth-first construction of the object system of a program."""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass
from typing import List, Optional

from .lang import Bounds, Config, Machine, ModelError, Program
from .lts import Lts, Witness, paused_gc


@dataclass(frozen=True)
class Stats:
    states: int
    transitions: int
    seconds: float


class StateCapExceeded(RuntimeError):
    def __init__(self, cap: int, stats: Stats):
        super().__init__(f"state cap of {cap} exceeded after {stats.states} states, "
                         f"{stats.transitions} transitions")
        self.cap = cap
        self.stats = stats


class ExplorationError(RuntimeError):
    """A model error hit during exploration, with the path that reaches it."""

    def __init__(self, error: ModelError, witness: Witness, config: Config, description: str):
        super().__init__(f"{error}\n  reached by: "
                         + " ".join(str(a) for _, a in witness.prefix)
                         + f"\n  in state: {description}")
        self.error = error
        self.witness = witness
        self.config = config


@dataclass
class Exploration:
    lts: Lts
    configs: List[Config]
    stats: Stats
    machine: Machine

    def config_of(self, state: int) -> Config:
        return self.configs[state]

    def describe(self, state: int) -> str:
        return self.machine.describe(self.configs[state])


def build_lts(program: Program, bounds: Bounds, machine: Optional[Machine] = None) -> Exploration:
    """Explore every reachable configuration from the initial one.

    States are numbered in BFS discovery order, so state 0 is the initial
    configuration and rebuilding gives an identical LTS.
    """
    with paused_gc():
        return _build(program, bounds, machine)


def _build(program, bounds, machine):
    machine = machine or Machine(program, bounds)
    start = time.perf_counter()
    init = machine.init_config()
    index = {init: 0}
    configs = [init]
    parent = [(-1, None)]
    trans = []
    cap = bounds.state_cap
    queue = deque([0])
    step = machine.step
    while queue:
        s = queue.popleft()
        try:
            moves = step(configs[s])
        except ModelError as exc:
            path = []
            cur = s
            while parent[cur][0] >= 0:
                p, lab = parent[cur]
                path.append((p, lab))
                cur = p
            path.reverse()
            witness = Witness(0, tuple(path), s, note=str(exc))
            raise ExplorationError(exc, witness, configs[s], machine.describe(configs[s])) from exc
        for label, cfg in moves:
            d = index.get(cfg)
            if d is None:
                d = len(configs)
                if d >= cap:
                    raise StateCapExceeded(cap, Stats(d, len(trans),
                                                      time.perf_counter() - start))
                index[cfg] = d
                configs.append(cfg)
                parent.append((s, label))
                queue.append(d)
            trans.append((s, label, d))
    lts = Lts(len(configs), 0, trans)
    stats = Stats(lts.num_states, lts.num_transitions, time.perf_counter() - start)
    return Exploration(lts, configs, stats, machine)
