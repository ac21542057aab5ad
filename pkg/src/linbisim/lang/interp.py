"""Small-step semantics of object models under a bounded most general client.

A method body is compiled into a flat list of instructions. Each instruction
that reads or writes shared state (shared variables, the ``HP``-style arrays,
node fields, allocation, reclamation) is one tau step of its thread; purely
local instructions are folded into the move that precedes them. A local loop
that revisits the same control point with the same locals stops the fold, so
local divergence still shows up as a tau cycle.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Mapping, NamedTuple, Optional, Sequence, Tuple

from ..lts import EMPTY, ActionLabel, TAU
from .ast import (Assign, Atomic, Binary, Break, Cas, Field, If, Index, Lit, LocalDecl, Name,
                  NewNode, NThreads, Program, Retire, Return, Skip, Tid, Unary, While)
from .validate import declared_locals, validate, ModelValidationError

IDLE, RUNNING, DONE = 0, 1, 2
STATUS_NAMES = {IDLE: "idle", RUNNING: "running", DONE: "done"}

EXEC, BRANCH, JUMP, RET = range(4)

FREE_NODE = (False, None, None)


class BoundsError(ValueError):
    pass


class ModelError(RuntimeError):
    """A run-time fault of the modelled program (null dereference, range, ...)."""

    def __init__(self, message: str, thread: int = 0, loc=(0, 0)):
        where = f" (thread {thread}, line {loc[0]})" if thread else ""
        super().__init__(message + where)
        self.reason = message
        self.thread = thread
        self.loc = loc


class NullDereference(ModelError):
    pass


class PoolExhausted(ModelError):
    pass


@dataclass(frozen=True)
class Bounds:
    """Exploration bounds.

    ``client`` optionally restricts which methods each thread may invoke
    (``{1: ("dec",), 2: ("inc",)}``); threads not listed may call anything.
    With ``sync_start`` every thread issues its first call before any thread
    takes an internal or return step.
    """

    threads: int = 2
    ops: int = 1
    values: int = 1
    pool: Optional[int] = None
    state_cap: int = 5_000_000
    client: Optional[Mapping[int, Tuple[str, ...]]] = None
    sync_start: bool = False
    pool_exhaustion: str = "prune"

    def __post_init__(self):
        if self.pool is None:
            object.__setattr__(self, "pool", self.threads * self.ops + 1)
        if self.client is not None:
            object.__setattr__(self, "client",
                               {int(t): tuple(ms) for t, ms in dict(self.client).items()})
        for name in ("threads", "ops", "values", "pool", "state_cap"):
            if getattr(self, name) < 1:
                raise BoundsError(f"{name} must be at least 1, got {getattr(self, name)}")
        if self.pool_exhaustion not in ("prune", "error"):
            raise BoundsError("pool_exhaustion must be 'prune' or 'error'")

    def __hash__(self):
        client = None if self.client is None else tuple(sorted(self.client.items()))
        return hash((self.threads, self.ops, self.values, self.pool, self.state_cap,
                     client, self.sync_start, self.pool_exhaustion))

    @property
    def label(self) -> str:
        return f"{self.threads}/{self.ops}"


class ThreadState(NamedTuple):
    status: int
    remaining: int
    method: int        # index into the program's methods, -1 when not running
    pc: int            # -1 when not running
    locals: tuple


class Config(NamedTuple):
    shared: tuple      # scalars, or tuples for per-thread arrays
    heap: tuple        # per node: (allocated, value, next)
    threads: tuple     # ThreadState per thread, thread t at index t-1


class _Ctx:
    __slots__ = ("sh", "heap", "locs", "tid", "k")


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


class _Instr(NamedTuple):
    kind: int
    fn: object
    target: int
    shared: bool
    loc: tuple


class _Method(NamedTuple):
    name: str
    has_param: bool
    nlocals: int
    local_names: tuple
    code: tuple


class Machine:
    """A validated program compiled against fixed bounds."""

    def __init__(self, program: Program, bounds: Bounds):
        issues = validate(program)
        if issues:
            raise ModelValidationError(issues)
        self.program = program
        self.bounds = bounds
        self.k = bounds.threads
        self.shared_names = [d.name for d in program.shared]
        self.shared_index = {d.name: i for i, d in enumerate(program.shared)}
        self.shared_decls = program.shared
        self.methods: List[_Method] = [self._compile_method(m) for m in program.methods]
        self.method_index = {m.name: i for i, m in enumerate(self.methods)}
        self.allowed = []
        for t in range(1, self.k + 1):
            names = None if bounds.client is None else bounds.client.get(t)
            if names is None:
                self.allowed.append(tuple(range(len(self.methods))))
            else:
                unknown = [n for n in names if n not in self.method_index]
                if unknown:
                    raise BoundsError(f"client of thread {t} names unknown methods {unknown}")
                self.allowed.append(tuple(self.method_index[n] for n in names))
        self._labels: Dict[tuple, ActionLabel] = {}

    # ------------------------------------------------------------ compilation

    def _compile_method(self, m):
        names = declared_locals(m)
        self._slots = {n: i for i, n in enumerate(names)}
        code: List[list] = []
        self._gen(m.body, code, loop_end=None)
        code.append([RET, None, -1, False, m.loc])
        finished = tuple(_Instr(*ins) for ins in code)
        return _Method(m.name, m.param is not None, len(names), tuple(names), finished)

    def _gen(self, stmts, code, loop_end):
        for s in stmts:
            if isinstance(s, (Assign, Retire, Atomic)) or (isinstance(s, LocalDecl) and s.rhs):
                code.append([EXEC, self._stmt(s), -1, self._touches(s), s.loc])
            elif isinstance(s, If):
                br = len(code)
                code.append([BRANCH, self._cond(s.cond), -1, self._touches(s.cond), s.loc])
                self._gen(s.then, code, loop_end)
                if s.orelse:
                    jmp = len(code)
                    code.append([JUMP, None, -1, False, s.loc])
                    code[br][2] = len(code)
                    self._gen(s.orelse, code, loop_end)
                    code[jmp][2] = len(code)
                else:
                    code[br][2] = len(code)
            elif isinstance(s, While):
                head = len(code)
                code.append([BRANCH, self._cond(s.cond), -1, self._touches(s.cond), s.loc])
                breaks: List[int] = []
                self._gen(s.body, code, breaks)
                code.append([JUMP, None, head, False, s.loc])
                code[head][2] = len(code)
                for b in breaks:
                    code[b][2] = len(code)
            elif isinstance(s, Return):
                fn = None if s.value is None else self._expr(s.value)
                code.append([RET, fn, -1, False, s.loc])
            elif isinstance(s, Break):
                loop_end.append(len(code))
                code.append([JUMP, None, -1, False, s.loc])
            # Skip and bare local declarations compile to nothing.

    def _touches(self, node) -> bool:
        """Does evaluating ``node`` read or write shared state?"""
        if isinstance(node, Name):
            return node.name not in self._slots
        if isinstance(node, (Index, Field, NewNode, Retire)):
            return True
        if isinstance(node, Cas):
            return True
        if isinstance(node, Unary):
            return self._touches(node.operand)
        if isinstance(node, Binary):
            return self._touches(node.left) or self._touches(node.right)
        if isinstance(node, Assign):
            return self._touches(node.target) or self._touches(node.rhs)
        if isinstance(node, LocalDecl):
            return node.rhs is not None and self._touches(node.rhs)
        if isinstance(node, Atomic):
            return any(self._touches(s) for s in node.body)
        if isinstance(node, If):
            return (self._touches(node.cond) or any(self._touches(s) for s in node.then)
                    or any(self._touches(s) for s in node.orelse))
        return False

    def _cond(self, e):
        f = self._expr(e)
        loc = e.loc

        def cond(c):
            v = f(c)
            if v is not True and v is not False:
                raise ModelError(f"condition evaluated to non-boolean {v!r}", c.tid, loc)
            return v
        return cond

    def _expr(self, e):
        if isinstance(e, Lit):
            v = e.value
            return lambda c: v
        if isinstance(e, Name):
            if e.name in self._slots:
                i = self._slots[e.name]
                return lambda c: c.locs[i]
            j = self.shared_index[e.name]
            return lambda c: c.sh[j]
        if isinstance(e, Tid):
            return lambda c: c.tid
        if isinstance(e, NThreads):
            return lambda c: c.k
        if isinstance(e, Index):
            j = self.shared_index[e.array]
            idx = self._expr(e.index)
            loc = e.loc

            def index(c):
                i = idx(c)
                if not _is_int(i) or not 1 <= i <= c.k:
                    raise ModelError(f"array index {i!r} out of range 1..{c.k}", c.tid, loc)
                return c.sh[j][i - 1]
            return index
        if isinstance(e, Field):
            obj = self._expr(e.obj)
            pos = 1 if e.field == "value" else 2
            loc = e.loc

            def field(c):
                return c.heap[self._node(c, obj(c), loc)][pos]
            return field
        if isinstance(e, Unary):
            f = self._expr(e.operand)
            loc = e.loc
            if e.op == "!":
                def neg(c):
                    v = f(c)
                    if v is not True and v is not False:
                        raise ModelError(f"'!' applied to non-boolean {v!r}", c.tid, loc)
                    return not v
                return neg

            def minus(c):
                v = f(c)
                if not _is_int(v):
                    raise ModelError(f"'-' applied to non-integer {v!r}", c.tid, loc)
                return -v
            return minus
        if isinstance(e, Binary):
            return self._binary(e)
        raise TypeError(f"not an expression: {e!r}")

    def _binary(self, e):
        lf, rf, op, loc = self._expr(e.left), self._expr(e.right), e.op, e.loc
        if op == "&&":
            return lambda c: lf(c) and rf(c)
        if op == "||":
            return lambda c: lf(c) or rf(c)
        if op == "==":
            return lambda c: lf(c) == rf(c)
        if op == "!=":
            return lambda c: lf(c) != rf(c)

        def arith(c):
            a, b = lf(c), rf(c)
            if not (_is_int(a) and _is_int(b)):
                raise ModelError(f"operator {op!r} needs integers, got {a!r}, {b!r}", c.tid, loc)
            if op == "+":
                return a + b
            if op == "-":
                return a - b
            if op == "<":
                return a < b
            if op == "<=":
                return a <= b
            if op == ">":
                return a > b
            return a >= b
        return arith

    @staticmethod
    def _node(c, ref, loc):
        if ref is None:
            raise NullDereference("null dereference", c.tid, loc)
        if not _is_int(ref) or not 0 <= ref < len(c.heap):
            raise ModelError(f"invalid node reference {ref!r}", c.tid, loc)
        return ref

    def _setter(self, target):
        loc = target.loc
        if isinstance(target, Name):
            if target.name in self._slots:
                i = self._slots[target.name]

                def set_local(c, v):
                    c.locs[i] = v
                return set_local
            j = self.shared_index[target.name]
            decl = self.shared_decls[j]
            if decl.type == "int":
                lo, hi = decl.lo, decl.hi

                def set_int(c, v):
                    if not _is_int(v) or not lo <= v <= hi:
                        raise ModelError(f"value {v!r} outside {decl.name}: int[{lo}..{hi}]",
                                         c.tid, loc)
                    c.sh[j] = v
                return set_int
            if decl.type == "bool":
                def set_bool(c, v):
                    if v is not True and v is not False:
                        raise ModelError(f"non-boolean {v!r} stored in {decl.name}", c.tid, loc)
                    c.sh[j] = v
                return set_bool

            def set_shared(c, v):
                c.sh[j] = v
            return set_shared
        if isinstance(target, Index):
            j = self.shared_index[target.array]
            idx = self._expr(target.index)

            def set_index(c, v):
                i = idx(c)
                if not _is_int(i) or not 1 <= i <= c.k:
                    raise ModelError(f"array index {i!r} out of range 1..{c.k}", c.tid, loc)
                arr = list(c.sh[j])
                arr[i - 1] = v
                c.sh[j] = tuple(arr)
            return set_index
        obj = self._expr(target.obj)
        if target.field == "value":
            def set_value(c, v):
                r = self._node(c, obj(c), loc)
                node = c.heap[r]
                c.heap[r] = (node[0], v, node[2])
            return set_value

        def set_next(c, v):
            r = self._node(c, obj(c), loc)
            node = c.heap[r]
            c.heap[r] = (node[0], node[1], v)
        return set_next

    def _rhs(self, rhs):
        if isinstance(rhs, Cas):
            get = self._expr(rhs.target)
            put = self._setter(rhs.target)
            exp, new = self._expr(rhs.expected), self._expr(rhs.new)

            def cas(c):
                if get(c) == exp(c):
                    put(c, new(c))
                    return True
                return False
            return cas
        if isinstance(rhs, NewNode):
            val = self._expr(rhs.value)
            loc = rhs.loc

            def new_node(c):
                v = val(c)
                for i, node in enumerate(c.heap):
                    if not node[0]:
                        c.heap[i] = (True, v, None)
                        return i
                raise PoolExhausted("node pool exhausted", c.tid, loc)
            return new_node
        return self._expr(rhs)

    def _stmt(self, s):
        if isinstance(s, (Assign, LocalDecl)):
            target = s.target if isinstance(s, Assign) else Name(s.name, s.loc)
            put, val = self._setter(target), self._rhs(s.rhs)
            return lambda c: put(c, val(c))
        if isinstance(s, Retire):
            ref = self._expr(s.node)
            loc = s.loc

            def retire(c):
                r = self._node(c, ref(c), loc)
                if not c.heap[r][0]:
                    raise ModelError("retiring a node that is already free", c.tid, loc)
                c.heap[r] = FREE_NODE
            return retire
        if isinstance(s, Atomic):
            return self._block(s.body)
        if isinstance(s, If):
            cond, then, orelse = self._cond(s.cond), self._block(s.then), self._block(s.orelse)

            def branch(c):
                if cond(c):
                    then(c)
                else:
                    orelse(c)
            return branch
        if isinstance(s, (Skip, LocalDecl)):
            return lambda c: None
        raise TypeError(f"statement not allowed here: {s!r}")

    def _block(self, stmts):
        fns = [self._stmt(s) for s in stmts]

        def run(c):
            for f in fns:
                f(c)
        return run

    # ------------------------------------------------------------ semantics

    def init_config(self) -> Config:
        shared = []
        for d in self.shared_decls:
            if d.type == "ref[threads]":
                shared.append((None,) * self.k)
            elif d.init is not None:
                shared.append(d.init.value)
            elif d.type == "int":
                shared.append(0 if d.lo <= 0 <= d.hi else d.lo)
            elif d.type == "bool":
                shared.append(False)
            else:
                shared.append(None)
        heap = (FREE_NODE,) * self.bounds.pool
        threads = tuple(ThreadState(IDLE, self.bounds.ops, -1, -1, ()) for _ in range(self.k))
        return Config(tuple(shared), heap, threads)

    def _label(self, kind, tid, method, value):
        key = (kind, tid, method, value)
        lab = self._labels.get(key)
        if lab is None:
            lab = self._labels[key] = ActionLabel(kind, tid, method, value)
        return lab

    def _settle(self, code, c, pc, seen=None):
        while True:
            ins = code[pc]
            if ins.kind == RET or ins.shared:
                return pc
            key = (pc, tuple(c.locs))
            if seen is None:
                seen = {key}
            elif key in seen:
                return pc
            else:
                seen.add(key)
            pc = self._exec(ins, c, pc)

    @staticmethod
    def _exec(ins, c, pc):
        kind = ins.kind
        if kind == EXEC:
            ins.fn(c)
            return pc + 1
        if kind == BRANCH:
            return pc + 1 if ins.fn(c) else ins.target
        return ins.target

    def _ctx(self, config, tid, locs):
        c = _Ctx()
        c.sh = list(config.shared)
        c.heap = list(config.heap)
        c.locs = list(locs)
        c.tid = tid
        c.k = self.k
        return c

    def step(self, config: Config) -> List[Tuple[ActionLabel, Config]]:
        """All enabled moves from ``config``, ordered by thread then choice."""
        moves = []
        threads = config.threads
        ops = self.bounds.ops
        gate = self.bounds.sync_start and any(
            th.status == IDLE and th.remaining == ops and self.allowed[t]
            for t, th in enumerate(threads))
        for t, th in enumerate(threads):
            tid = t + 1
            if th.status == IDLE and th.remaining > 0:
                for mi in self.allowed[t]:
                    m = self.methods[mi]
                    for arg in (range(1, self.bounds.values + 1) if m.has_param else (None,)):
                        locs = [None] * m.nlocals
                        if m.has_param:
                            locs[0] = arg
                        c = self._ctx(config, tid, locs)
                        pc = self._settle(m.code, c, 0)
                        new = ThreadState(RUNNING, th.remaining - 1, mi, pc, tuple(c.locs))
                        moves.append((self._label("call", tid, m.name, arg),
                                      self._replace(config, t, new, None, None)))
            elif th.status == RUNNING and not gate:
                m = self.methods[th.method]
                ins = m.code[th.pc]
                c = self._ctx(config, tid, th.locals)
                if ins.kind == RET:
                    value = None if ins.fn is None else ins.fn(c)
                    if not (value is None or value == EMPTY or _is_int(value)):
                        raise ModelError(f"cannot return {value!r}", tid, ins.loc)
                    status = IDLE if th.remaining > 0 else DONE
                    new = ThreadState(status, th.remaining, -1, -1, ())
                    moves.append((self._label("ret", tid, m.name, value),
                                  self._replace(config, t, new, None, None)))
                    continue
                try:
                    pc = self._exec(ins, c, th.pc)
                except PoolExhausted:
                    if self.bounds.pool_exhaustion == "prune":
                        continue
                    raise
                # a step that started on a local instruction is part of a spin
                origin = None if ins.shared else {(th.pc, th.locals)}
                pc = self._settle(m.code, c, pc, origin)
                new = ThreadState(RUNNING, th.remaining, th.method, pc, tuple(c.locs))
                moves.append((TAU, self._replace(config, t, new, c.sh, c.heap)))
        return moves

    @staticmethod
    def _replace(config, t, thread, sh, heap):
        threads = config.threads[:t] + (thread,) + config.threads[t + 1:]
        return Config(config.shared if sh is None else tuple(sh),
                      config.heap if heap is None else tuple(heap),
                      threads)

    # ------------------------------------------------------------ diagnostics

    def describe(self, config: Config) -> str:
        parts = []
        for name, v in zip(self.shared_names, config.shared):
            parts.append(f"{name}={_fmt(v)}")
        nodes = [f"n{i}({_fmt(n[1])},{_fmt(n[2])})" for i, n in enumerate(config.heap) if n[0]]
        if nodes:
            parts.append("heap=[" + " ".join(nodes) + "]")
        for t, th in enumerate(config.threads, start=1):
            if th.status == RUNNING:
                m = self.methods[th.method]
                line = m.code[th.pc].loc[0]
                locs = ",".join(f"{n}={_fmt(v)}" for n, v in zip(m.local_names, th.locals)
                                if v is not None)
                parts.append(f"t{t}:{m.name}@{line}[{locs}]")
            else:
                parts.append(f"t{t}:{STATUS_NAMES[th.status]}({th.remaining})")
        return " ".join(parts)

    def thread_position(self, config: Config, tid: int):
        """(method name, source line) of a running thread, else None."""
        th = config.threads[tid - 1]
        if th.status != RUNNING:
            return None
        m = self.methods[th.method]
        return m.name, m.code[th.pc].loc[0]


def _fmt(v):
    if v is None:
        return "null"
    if isinstance(v, tuple):
        return "[" + ",".join(_fmt(x) for x in v) + "]"
    return str(v)


def init_config(program: Program, bounds: Bounds) -> Config:
    return Machine(program, bounds).init_config()


def step(machine: Machine, config: Config) -> List[Tuple[ActionLabel, Config]]:
    return machine.step(config)
