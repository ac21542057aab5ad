"""Command-line front end: verify, explore, oracle and bench."""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from . import __version__
from .bisim import (SpecNotLockFree, coarsest_partition, equivalent, mark_divergent,
                    spec_lockfree_sanity, verify_object)
from .explore import ExplorationError, StateCapExceeded, build_lts
from .lang import (Bounds, BoundsError, ModelSyntaxError, ModelValidationError, Program,
                   load_program)
from .lts import Lts, Witness, write_aut
from .models import CATALOG, UnknownModel, get_model
from .oracle import SEQ_SPECS, check_object_lin, default_max_events
from .refine import linearizable_by_refinement

SCHEMA = "linbisim.report/1"

EXIT_OK, EXIT_REFUTED, EXIT_INPUT, EXIT_CAP = 0, 1, 2, 3


class InputError(Exception):
    pass


class _Model:
    """A model named on the command line: a catalog entry or a file."""

    def __init__(self, ref: str):
        self.ref = ref
        path = Path(ref)
        self.entry = None
        if ref in CATALOG:
            self.entry = get_model(ref)
            self.name = ref
            source = self.entry.source
        elif path.suffix == ".model" or path.exists():
            if not path.is_file():
                raise InputError(f"{ref}: no such model file")
            self.name = path.stem
            source = path.read_text()
        else:
            try:
                get_model(ref)
            except UnknownModel as exc:
                raise InputError(str(exc)) from None
        try:
            self.program: Program = load_program(source)
        except ModelSyntaxError as exc:
            raise InputError(f"{ref}: {exc}") from None
        except ModelValidationError as exc:
            raise InputError(f"{ref}: invalid model\n{exc}") from None


def _parse_client(items: Optional[List[str]]):
    if not items:
        return None
    client: Dict[int, Tuple[str, ...]] = {}
    for item in items:
        tid, sep, methods = item.partition(":")
        if not sep or not tid.strip().isdigit() or not methods.strip():
            raise InputError(f"--client expects THREAD:METHOD[,METHOD...], got {item!r}")
        client[int(tid)] = tuple(m.strip() for m in methods.split(",") if m.strip())
    return client


def _bounds(args, *models: _Model) -> Bounds:
    client = _parse_client(args.client)
    sync = args.sync_start
    if client is None and not args.any_client:
        for m in models:
            if m.entry is not None and m.entry.client is not None:
                client, sync = m.entry.client, m.entry.sync_start or sync
                break
    try:
        return Bounds(threads=args.threads, ops=args.ops, values=args.values, pool=args.pool,
                      state_cap=args.state_cap, client=client, sync_start=sync)
    except BoundsError as exc:
        raise InputError(str(exc)) from None


def _bounds_json(b: Bounds) -> dict:
    return {"threads": b.threads, "ops": b.ops, "values": b.values, "pool": b.pool,
            "state_cap": b.state_cap,
            "client": None if b.client is None else {str(t): list(ms) for t, ms in
                                                     sorted(b.client.items())},
            "sync_start": b.sync_start}


def _explore(model: _Model, bounds: Bounds):
    try:
        return build_lts(model.program, bounds)
    except BoundsError as exc:
        raise InputError(f"{model.ref}: {exc}") from None
    except ExplorationError as exc:
        raise InputError(f"{model.ref}: run-time error in model: {exc}") from None


# ------------------------------------------------------------------ witnesses

def witness_json(w: Witness, offset: int, sides=("impl", "spec")) -> dict:
    side = sides[0] if w.start < offset else sides[1]
    if side == sides[1]:
        w = w.shifted(-offset)
    def steps(seq, end):
        ends = [s for s, _ in seq[1:]] + [end]
        return [[s, str(lab), d] for (s, lab), d in zip(seq, ends)]
    return {"side": side, "kind": w.note, "start": w.start,
            "prefix": steps(list(w.prefix), w.last), "cycle": steps(list(w.cycle), w.last),
            "trace": [str(a) for a in w.visible_trace()]}


def render_witness(wj: dict) -> List[str]:
    """Numbered states and labelled edges; the cycle is marked ``<loop>``."""
    lines = [f"witness ({wj['kind'] or 'path'}) on {wj['side']}, from state {wj['start']}:"]
    for s, lab, d in wj["prefix"]:
        lines.append(f"  {s:>6} --{lab}--> {d}")
    for s, lab, d in wj["cycle"]:
        lines.append(f"  {s:>6} --{lab}--> {d}  <loop>")
    if not wj["prefix"] and not wj["cycle"]:
        lines.append(f"  {wj['start']:>6}  (the initial states already differ)")
    return lines


# ------------------------------------------------------------------ commands

def cmd_verify(args) -> Tuple[dict, int]:
    impl, spec = _Model(args.impl), _Model(args.spec)
    bounds = _bounds(args, impl, spec)
    t0 = time.perf_counter()
    ie = _explore(impl, bounds)
    se = _explore(spec, bounds)
    build_time = time.perf_counter() - t0
    report = {"schema": SCHEMA, "command": "verify", "impl": impl.name, "spec": spec.name,
              "bounds": _bounds_json(bounds),
              "lts": {"impl": {"states": ie.stats.states, "transitions": ie.stats.transitions},
                      "spec": {"states": se.stats.states, "transitions": se.stats.transitions}}}
    timings = {"explore": build_time}
    report["_timings"] = timings
    lasso = spec_lockfree_sanity(se.lts)
    if lasso is not None:
        report["error"] = "specification has a reachable tau cycle"
        report["witness"] = witness_json(lasso, 0, ("spec", "spec"))
        return report, EXIT_INPUT
    checks = {}
    witness = None
    offset = ie.lts.num_states
    if args.no_divergence:
        v = equivalent(ie.lts, se.lts, divergence=False)
        timings["bisim"] = v.seconds
        checks["bisim"] = v.equivalent
        checks["div_bisim"] = None
        verdict = {"linearizable": True if v.equivalent else None, "lock_free": None}
        witness = v.witness
        code = EXIT_OK if v.equivalent else EXIT_REFUTED
    else:
        rep = verify_object(ie.lts, se.lts)
        timings["div_bisim"] = rep.div_verdict.seconds
        checks["div_bisim"] = rep.div_verdict.equivalent
        checks["bisim"] = (rep.bisim_verdict.equivalent if rep.bisim_verdict is not None
                           else True)
        if rep.bisim_verdict is not None:
            timings["bisim"] = rep.bisim_verdict.seconds
        verdict = {"linearizable": rep.linearizable, "lock_free": rep.lock_free}
        witness = rep.witness
        code = EXIT_OK if rep.div_verdict.equivalent else EXIT_REFUTED
    ref = linearizable_by_refinement(ie.lts, se.lts)
    timings["refinement"] = ref.seconds
    checks["refinement"] = ref.holds
    report["checks"] = checks
    report["verdict"] = verdict
    report["refinement_counterexample"] = (None if ref.holds else
                                           [str(a) for a in ref.counterexample])
    report["witness"] = None if witness is None else witness_json(witness, offset)
    if args.timings:
        report["timings"] = timings
    return report, code


def cmd_explore(args) -> Tuple[dict, int]:
    model = _Model(args.model)
    bounds = _bounds(args, model)
    ex = _explore(model, bounds)
    divergent = mark_divergent(ex.lts, coarsest_partition(ex.lts, divergence=True))
    report = {"schema": SCHEMA, "command": "explore", "model": model.name,
              "bounds": _bounds_json(bounds),
              "lts": {"states": ex.stats.states, "transitions": ex.stats.transitions},
              "divergent_states": len(divergent)}
    if args.aut:
        Path(args.aut).write_text(write_aut(ex.lts))
        report["aut"] = args.aut
    timings = {"explore": ex.stats.seconds}
    if args.timings:
        report["timings"] = timings
    report["_timings"] = timings
    return report, EXIT_OK


def cmd_oracle(args) -> Tuple[dict, int]:
    model = _Model(args.model)
    bounds = _bounds(args, model)
    ex = _explore(model, bounds)
    max_events = args.max_events or default_max_events(bounds.threads, bounds.ops)
    t0 = time.perf_counter()
    res = check_object_lin(ex.lts, SEQ_SPECS[args.seq_spec], max_events, bounds.values)
    report = {"schema": SCHEMA, "command": "oracle", "model": model.name,
              "seq_spec": args.seq_spec, "bounds": _bounds_json(bounds),
              "max_events": max_events,
              "lts": {"states": ex.stats.states, "transitions": ex.stats.transitions},
              "linearizable": res.ok, "histories_checked": res.checked,
              "failing_history": (None if res.failing_history is None
                                  else [str(e) for e in res.failing_history])}
    timings = {"explore": ex.stats.seconds, "oracle": time.perf_counter() - t0}
    if args.timings:
        report["timings"] = timings
    report["_timings"] = timings
    return report, EXIT_OK if res.ok else EXIT_REFUTED


def _parse_grid(text: str) -> List[Tuple[int, int]]:
    grid = []
    for cell in text.split(","):
        k, sep, n = cell.strip().partition("/")
        if not sep or not k.isdigit() or not n.isdigit():
            raise InputError(f"--grid expects THREADS/OPS[,...], got {cell!r}")
        grid.append((int(k), int(n)))
    return grid


def bench_row(model: _Model, spec: _Model, bounds: Bounds, repeat: int = 1) -> dict:
    """One benchmark row: state counts and the two checks' wall-times.

    Each time is the minimum over ``repeat`` runs and excludes exploration.
    """
    row = {"model": model.name, "spec": spec.name, "bound": bounds.label}
    try:
        ie = build_lts(model.program, bounds)
        se = build_lts(spec.program, bounds)
    except StateCapExceeded as exc:
        row.update(status="M.O.", reason=str(exc))
        return row
    bis, ref = [], []
    for _ in range(max(1, repeat)):
        v = equivalent(ie.lts, se.lts, divergence=True)
        bis.append(v.seconds)
        r = linearizable_by_refinement(ie.lts, se.lts)
        ref.append(r.seconds)
    row.update(status="ok", spec_states=se.stats.states, impl_states=ie.stats.states,
               impl_transitions=ie.stats.transitions, div_bisim=v.equivalent,
               refinement=r.holds, bisim_time=min(bis), refinement_time=min(ref))
    return row


def cmd_bench(args) -> Tuple[dict, int]:
    grid = _parse_grid(args.grid)
    spec = _Model(args.spec)
    rows = []
    for name in args.models.split(","):
        model = _Model(name.strip())
        for k, n in grid:
            a = argparse.Namespace(**vars(args))
            a.threads, a.ops = k, n
            a.pool = None
            rows.append(bench_row(model, spec, _bounds(a, model, spec), args.repeat))
    report = {"schema": SCHEMA, "command": "bench", "spec": spec.name, "rows": []}
    for row in rows:
        shown = {k: v for k, v in row.items() if not k.endswith("_time")}
        if args.timings:
            shown.update({k: v for k, v in row.items() if k.endswith("_time")})
        report["rows"].append(shown)
    report["_rows"] = rows
    return report, EXIT_OK


# ------------------------------------------------------------------ output

def _fmt(v) -> str:
    return {True: "yes", False: "no", None: "not established"}.get(v, str(v)) \
        if isinstance(v, (bool, type(None))) else str(v)


def render_text(report: dict) -> List[str]:
    cmd = report["command"]
    out: List[str] = []
    b = report.get("bounds")
    bl = f"{b['threads']}/{b['ops']} values={b['values']} pool={b['pool']}" if b else ""
    if cmd == "verify":
        out.append(f"verify {report['impl']} against {report['spec']} at {bl}")
        lts = report["lts"]
        out.append(f"  impl: {lts['impl']['states']} states, {lts['impl']['transitions']} "
                   f"transitions; spec: {lts['spec']['states']} states, "
                   f"{lts['spec']['transitions']} transitions")
        if "error" in report:
            out.append(f"  error: {report['error']}")
        else:
            c, v = report["checks"], report["verdict"]
            out.append(f"  branching bisimilar:            {_fmt(c['bisim'])}")
            if c["div_bisim"] is not None:
                out.append(f"  divergence-sensitive bisimilar: {_fmt(c['div_bisim'])}")
            out.append(f"  trace refinement:               {_fmt(c['refinement'])}")
            out.append(f"  linearizable: {_fmt(v['linearizable'])}; "
                       f"lock-free: {_fmt(v['lock_free']) if c['div_bisim'] is not None else 'not checked'}")
            if report.get("refinement_counterexample"):
                out.append("  refinement counterexample: "
                           + " ".join(report["refinement_counterexample"]))
        t = report["_timings"]
        out.append("  time: " + ", ".join(f"{k} {v:.3f}s" for k, v in t.items()))
    elif cmd == "explore":
        out.append(f"explore {report['model']} at {bl}")
        out.append(f"  {report['lts']['states']} states, {report['lts']['transitions']} "
                   f"transitions, {report['divergent_states']} divergent states")
        if "aut" in report:
            out.append(f"  written to {report['aut']}")
    elif cmd == "oracle":
        out.append(f"oracle {report['model']} against the sequential {report['seq_spec']} "
                   f"at {bl}, histories up to {report['max_events']} events")
        out.append(f"  {report['histories_checked']} maximal histories checked; "
                   f"linearizable: {_fmt(report['linearizable'])}")
        if report["failing_history"]:
            out.append("  failing history: " + " ".join(report["failing_history"]))
    elif cmd == "bench":
        out.append(f"{'model':<26} {'#thr/#op':>8} {'spec':>7} {'impl':>8} "
                   f"{'bisim(s)':>9} {'refine(s)':>9}  verdicts")
        for r in report["_rows"]:
            k, n = r["bound"].split("/")
            if r["status"] != "ok":
                out.append(f"{r['model']:<26} {r['bound']:>8} {'M.O.':>7}")
                continue
            out.append(f"{r['model']:<26} {r['bound']:>8} {r['spec_states']:>7} "
                       f"{r['impl_states']:>8} {r['bisim_time']:>9.3f} "
                       f"{r['refinement_time']:>9.3f}  div-bisim={_fmt(r['div_bisim'])} "
                       f"refinement={_fmt(r['refinement'])}")
    if report.get("witness"):
        out.extend(render_witness(report["witness"]))
    return out


def to_json(report: dict) -> str:
    public = {k: v for k, v in report.items() if not k.startswith("_")}
    return json.dumps(public, indent=2, sort_keys=True) + "\n"


# ------------------------------------------------------------------ parser

def _add_bounds(p):
    p.add_argument("--threads", type=int, default=2, help="number of threads (default 2)")
    p.add_argument("--ops", type=int, default=1, help="operations per thread (default 1)")
    p.add_argument("--values", type=int, default=1, help="argument values 1..V (default 1)")
    p.add_argument("--pool", type=int, default=None,
                   help="heap nodes (default threads*ops+1)")
    p.add_argument("--state-cap", type=int, default=5_000_000,
                   help="abort exploration beyond this many states")
    p.add_argument("--client", action="append", metavar="T:M[,M]",
                   help="restrict thread T to the listed methods (repeatable)")
    p.add_argument("--sync-start", action="store_true",
                   help="every thread makes its first call before anything else happens")
    p.add_argument("--any-client", action="store_true",
                   help="ignore a catalog model's default client")


def _add_output(p):
    p.add_argument("--json", action="store_true", help="print the JSON report")
    p.add_argument("--timings", action="store_true",
                   help="include wall-times in the JSON report")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linbisim",
        description="Check linearizability and lock-freedom of concurrent objects by "
                    "branching bisimulation.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="compare an implementation with its specification")
    p.add_argument("impl", help="catalog name or .model file")
    p.add_argument("spec", help="catalog name or .model file")
    p.add_argument("--no-divergence", action="store_true",
                   help="plain branching bisimulation only (no lock-freedom verdict)")
    _add_bounds(p)
    _add_output(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("explore", help="build a model's state space")
    p.add_argument("model", help="catalog name or .model file")
    p.add_argument("--aut", metavar="FILE", help="write the LTS in .aut format")
    _add_bounds(p)
    _add_output(p)
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("oracle", help="brute-force linearizability check of histories")
    p.add_argument("model", help="catalog name or .model file")
    p.add_argument("seq_spec", choices=sorted(SEQ_SPECS), help="sequential specification")
    p.add_argument("--max-events", type=int, default=None,
                   help="history length bound (default 2*threads*ops)")
    _add_bounds(p)
    _add_output(p)
    p.set_defaults(func=cmd_oracle)

    p = sub.add_parser("bench", help="time bisimulation against refinement over a grid")
    p.add_argument("--models", default="treiber,treiber_hp",
                   help="comma-separated models (default treiber,treiber_hp)")
    p.add_argument("--spec", default="stack_spec", help="specification (default stack_spec)")
    p.add_argument("--grid", default="2/1,2/2", help="bounds as THREADS/OPS list")
    p.add_argument("--repeat", type=int, default=1, help="take the fastest of N runs")
    _add_bounds(p)
    _add_output(p)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        report, code = args.func(args)
    except InputError as exc:
        print(f"linbisim: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except StateCapExceeded as exc:
        print(f"linbisim: {exc}", file=sys.stderr)
        return EXIT_CAP
    except SpecNotLockFree as exc:
        print(f"linbisim: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    if args.json:
        sys.stdout.write(to_json(report))
    else:
        print("\n".join(render_text(report)))
    return code


if __name__ == "__main__":
    sys.exit(main())
