"""Command line front end.

Exit codes: 0 success/safe, 1 violation detected, 2 usage or configuration
error, 3 I/O or parse error.
"""

from __future__ import annotations

import argparse
import json
import os
import random
import sys
import tempfile
from pathlib import Path

from . import analysis, montecarlo, sim
from .placement import Placement
from .protocol import ProtocolParams
from .topology import (
    InvalidNode,
    InvalidParameter,
    Topology,
    TopologyParseError,
    from_spec,
    load_topology,
    make_grid,
    make_torus,
)

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    pass


def write_atomic(path: str, text: str) -> None:
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=target.parent or ".", prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text: str, out: str | None) -> None:
    if out:
        write_atomic(out, text)
    else:
        sys.stdout.write(text)


def dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- argument plumbing -----------------------------------------------------------


def build_topology(args) -> Topology:
    spec = args.topology
    if spec.startswith("file:"):
        return load_topology(spec[len("file:"):])
    if args.n is None:
        raise UsageError("--n is required for generated topologies")
    n = _single_int(args.n, "--n")
    if spec == "grid":
        return make_grid(n)
    if spec == "torus":
        return make_torus(n)
    raise UsageError(f"unknown topology {spec!r}; use grid, torus or file:PATH")


def _single_int(text: str, flag: str) -> int:
    try:
        return int(text)
    except ValueError:
        raise UsageError(f"{flag} expects an integer here, got {text!r}") from None


def parse_int_list(text: str) -> list[int]:
    """``"0..20"``, ``"0..20:5"`` (step), ``"1,4,9"`` or ``"14"``."""
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ".." in part:
            rng, _, step = part.partition(":")
            lo, hi = (int(x) for x in rng.split(".."))
            out.extend(range(lo, hi + 1, int(step) if step else 1))
        elif part:
            out.append(int(part))
    if not out:
        raise UsageError(f"empty list {text!r}")
    return out


def build_placement(args, t: Topology) -> Placement:
    if args.nb is not None:
        nb = _single_int(args.nb, "--nb")
        if not 0 <= nb <= t.n - 1:
            raise UsageError(f"--nb {nb} does not fit {t.n} nodes")
        rng = random.Random(args.seed)
        byz = frozenset(rng.sample(range(t.n), nb))
        source = rng.choice([v for v in t.nodes() if v not in byz])
        return Placement(t, source, byz)
    if args.source is None:
        raise UsageError("give --source with --byz, or --nb for a random placement")
    source = t.parse_node(args.source)
    byz = frozenset(t.parse_node(x) for x in (args.byz or "").split(";") if x.strip())
    return Placement(t, source, byz)


def label(t: Topology, v: int):
    return "%d,%d" % t.coords(v) if t.side else str(v)


def effective_config(args, **extra) -> dict:
    cfg = {k: v for k, v in sorted(vars(args).items()) if k not in ("func", "out")}
    cfg.update(extra)
    return cfg


# -- subcommands -----------------------------------------------------------------


def cmd_analyze(args) -> int:
    t = build_topology(args)
    pl = build_placement(args, t)
    params = ProtocolParams(args.hops)
    rep = analysis.analyze_placement(pl, params)
    body = rep.to_json(t)
    body["config"] = effective_config(
        args, source=label(t, pl.source), byzantine=[label(t, b) for b in sorted(pl.byzantine)]
    )
    if args.format == "csv":
        cols = ["D", "safe", "reliableSetSize", "coverage", "excludedNodes", "seed"]
        row = dict(body, seed=args.seed, excludedNodes=" ".join(
            ",".join(map(str, x)) if isinstance(x, list) else str(x) for x in body["excludedNodes"]))
        text = ",".join(cols) + "\n" + ",".join(_csv_cell(row[c]) for c in cols) + "\n"
    else:
        text = dumps(body)
    emit(text, args.out)
    return EXIT_OK


def _csv_cell(v) -> str:
    s = str(v).lower() if isinstance(v, bool) else str(v)
    return f'"{s}"' if ("," in s or " " in s) else s


def cmd_simulate(args) -> int:
    t = build_topology(args)
    pl = build_placement(args, t)
    params = ProtocolParams(args.hops)
    if args.script:
        try:
            script = sim.ByzantineScript.from_json(json.loads(Path(args.script).read_text()))
        except json.JSONDecodeError as exc:
            raise TopologyParseError(f"script: {exc.msg}", exc.lineno, exc.colno) from exc
    else:
        script = sim.make_strategy(args.strategy, pl, params, args.seed)
    sched = sim.Scheduler(args.scheduler, args.seed)
    trace = sim.run_execution(pl, params, sched, script)
    verdict = sim.check_safety(trace, pl)
    if args.out:
        write_atomic(args.out, trace.to_jsonl())
    correct = pl.correct_nodes()
    summary = {
        "config": effective_config(
            args,
            source=label(t, pl.source),
            byzantine=[label(t, b) for b in sorted(pl.byzantine)],
            script=script.name,
            trace=args.out,
        ),
        "verdict": str(verdict),
        "safe": verdict.safe,
        "violations": [[label(t, v), m.decode("latin-1")] for v, m in verdict.violations],
        "quiescent": trace.quiescent,
        "steps": trace.steps,
        "authenticDelivered": sum(pl.payload in trace.delivered[v] for v in correct),
        "correctNodes": len(correct),
        "undelivered": [label(t, v) for v in correct if pl.payload not in trace.delivered[v]],
    }
    sys.stdout.write(dumps(summary))
    return EXIT_OK if verdict.safe else EXIT_VIOLATION


def cmd_montecarlo(args) -> int:
    if args.topology not in ("grid", "torus"):
        raise UsageError("montecarlo runs on --topology grid or torus")
    if args.n is None:
        raise UsageError("--n is required")
    sides = parse_int_list(args.n)
    nbs = parse_int_list(args.nb if args.nb is not None else "0")
    configs = [
        montecarlo.TrialConfig(args.topology, n, nb, args.hops, args.trials, args.seed)
        for n in sides
        for nb in nbs
    ]
    report = montecarlo.sweep(configs, workers=args.workers)
    best = {m: report.max_tolerated(args.threshold, m) for m in montecarlo.MODES}
    cfg = effective_config(args)
    if args.format == "json":
        text = dumps({
            "config": cfg,
            "rows": [r.row(args.mode) for r in report.reports],
            "maxTolerated": {m: {str(k): v for k, v in best[m].items()} for m in best},
        })
    else:
        text = "# trigcast montecarlo " + json.dumps(cfg, sort_keys=True) + "\n"
        text += report.to_csv((args.mode,))
    emit(text, args.out)
    msg = "; ".join(
        f"N={n}: max n_B with p_hat >= {args.threshold}: {best[args.mode][n]} ({args.mode}), "
        f"{best['strict' if args.mode == 'paper' else 'paper'][n]} "
        f"({'strict' if args.mode == 'paper' else 'paper'})"
        for n in sides
    )
    print(msg, file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_gen_topology(args) -> int:
    if args.topology not in ("grid", "torus"):
        raise UsageError("gen-topology builds --topology grid or torus")
    t = build_topology(args)
    body = dict(t.to_edge_list(), generator={"kind": t.kind, "n": t.side})
    emit(json.dumps(body, sort_keys=True) + "\n", args.out)
    return EXIT_OK


def cmd_replay(args) -> int:
    try:
        lines = Path(args.trace).read_text().splitlines()
        meta, events, end = sim.read_trace(lines)
    except json.JSONDecodeError as exc:
        raise TopologyParseError(f"trace: {exc.msg}", exc.lineno, exc.colno) from exc
    except ValueError as exc:
        raise TopologyParseError(f"trace: {exc}") from exc
    problems = sim.verify_trace_events(events, end)
    rerun = sim.rerun_from_meta(meta)
    reproduced = rerun.to_jsonl().splitlines() == lines
    t = from_spec(meta["topology"])
    pl = Placement(t, meta["source"], frozenset(meta["byzantine"]), meta["payload"].encode("latin-1"))
    recorded = {int(k): frozenset(m.encode("latin-1") for m in v) for k, v in end["delivered"].items()}
    verdict = sim.check_safety(sim.ExecutionTrace(delivered=recorded), pl)
    body = {
        "trace": str(args.trace),
        "consistent": not problems,
        "problems": problems[:20],
        "reproduced": reproduced,
        "verdict": str(verdict),
        "safe": verdict.safe,
        "violations": [[label(t, v), m.decode("latin-1")] for v, m in verdict.violations],
    }
    emit(dumps(body), args.out)
    if problems or not reproduced:
        return EXIT_IO
    return EXIT_OK if verdict.safe else EXIT_VIOLATION


# -- parser ----------------------------------------------------------------------


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trigcast", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, topo_default="grid"):
        sp.add_argument("--topology", default=topo_default, help="grid, torus or file:PATH")
        sp.add_argument("--n", help="side length (montecarlo: list such as 100,500)")
        sp.add_argument("--hops", type=int, default=2, help="trigger hop bound H")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="output file (written atomically)")

    def placement_flags(sp):
        sp.add_argument("--source", help="source node: i,j on grid/torus, id on custom graphs")
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--byz", help='Byzantine nodes, e.g. "1,1;3,3"')
        g.add_argument("--nb", help="number of Byzantine nodes placed at random (uses --seed)")

    sp = sub.add_parser("analyze", help="D, safety verdict and reliable set of a placement")
    common(sp)
    placement_flags(sp)
    sp.add_argument("--format", choices=("json", "csv"), default="json")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("simulate", help="run one asynchronous execution")
    common(sp)
    placement_flags(sp)
    sp.add_argument("--strategy", default="silent", help="silent, flood or theorem2")
    sp.add_argument("--script", help="JSON action-list file instead of --strategy")
    sp.add_argument("--scheduler", choices=("random", "fifo"), default="random")
    sp.add_argument("--format", choices=("json",), default="json")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("montecarlo", help="estimate P(n_B) over a sweep")
    common(sp)
    sp.add_argument("--nb", default="0", help="n_B values: 14, 0..20, 0..30:5 or 1,2,3")
    sp.add_argument("--trials", type=int, default=1000)
    sp.add_argument("--mode", choices=montecarlo.MODES, default="paper")
    sp.add_argument("--threshold", type=float, default=0.99)
    sp.add_argument("--workers", type=int, default=1)
    sp.add_argument("--format", choices=("csv", "json"), default="csv")
    sp.set_defaults(func=cmd_montecarlo)

    sp = sub.add_parser("gen-topology", help="write a grid/torus as an explicit edge list")
    common(sp)
    sp.add_argument("--format", choices=("json",), default="json")
    sp.set_defaults(func=cmd_gen_topology)

    sp = sub.add_parser("replay", help="re-verify a simulate trace file")
    sp.add_argument("trace")
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_replay)
    return p


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"trigcast: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except TopologyParseError as exc:
        print(f"trigcast: parse error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (InvalidParameter, InvalidNode, montecarlo.InvalidConfig, ValueError) as exc:
        print(f"trigcast: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"trigcast: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
