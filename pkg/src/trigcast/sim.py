"""Deterministic asynchronous execution of the protocol.

A run keeps a multiset of in-flight ``(message, sender, receiver)`` triples.
At every step the due Byzantine actions are injected, then the scheduler
picks one triple and hands it to the receiver's transition function.  The
run ends at quiescence (nothing in flight, script exhausted) or at the step
cap.
"""

from __future__ import annotations

import json
import random
from collections import deque
from dataclasses import dataclass, field
from typing import Iterable

from . import protocol as P
from .placement import Placement
from .protocol import Message, ProtocolParams, Standard, Trigger
from .topology import InvalidParameter, Topology, from_edges, from_spec

FORGED = b"X"


# -- wire helpers ------------------------------------------------------------


def _pl(b: bytes) -> str:
    return b.decode("latin-1")


def msg_to_json(msg: Message) -> dict:
    if isinstance(msg, Standard):
        return {"type": "standard", "payload": _pl(msg.payload)}
    return {"type": "trigger", "payload": _pl(msg.payload), "visited": sorted(msg.visited)}


def msg_from_json(d: dict) -> Message:
    payload = d["payload"].encode("latin-1")
    if d["type"] == "standard":
        return Standard(payload)
    if d["type"] == "trigger":
        return Trigger(payload, frozenset(d.get("visited", ())))
    raise ValueError(f"unknown message type {d['type']!r}")


# -- adversary scripts -------------------------------------------------------


@dataclass(frozen=True)
class Action:
    step: int
    sender: int
    to: int
    msg: Message


@dataclass(frozen=True)
class ByzantineScript:
    actions: tuple[Action, ...] = ()
    name: str = "custom"

    def validate(self, placement: Placement) -> None:
        t = placement.topology
        for a in self.actions:
            if a.sender not in placement.byzantine:
                raise InvalidParameter(f"scripted sender {a.sender} is not Byzantine")
            if a.to not in t.adj[a.sender]:
                raise InvalidParameter(f"scripted send {a.sender}->{a.to} is not along an edge")
            if a.step < 0:
                raise InvalidParameter("action steps must be non-negative")

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "actions": [
                {"step": a.step, "from": a.sender, "to": a.to, "msg": msg_to_json(a.msg)}
                for a in self.actions
            ],
        }

    @classmethod
    def from_json(cls, d: dict) -> "ByzantineScript":
        acts = tuple(
            Action(int(a["step"]), int(a["from"]), int(a["to"]), msg_from_json(a["msg"]))
            for a in d.get("actions", ())
        )
        return cls(acts, d.get("name", "custom"))


def silent() -> ByzantineScript:
    return ByzantineScript((), "silent")


def collusion(placement: Placement, forged: bytes = FORGED) -> ByzantineScript:
    """Every Byzantine node pushes ``(forged)`` and ``(forged, {})`` to every neighbour."""
    t = placement.topology
    acts = []
    for b in sorted(placement.byzantine):
        for w in t.adj[b]:
            acts.append(Action(0, b, w, Standard(forged)))
            acts.append(Action(0, b, w, Trigger(forged, frozenset())))
    return ByzantineScript(tuple(acts), "theorem2")


def flood(
    placement: Placement,
    params: ProtocolParams,
    seed: int,
    horizon: int = 200,
    per_edge: int = 6,
) -> ByzantineScript:
    """Randomised forging at random steps: well-formed and malformed messages.

    Payloads include one forgery shared by all Byzantine nodes (collusion), a
    private one per node, and replays of the authentic payload.
    """
    rng = random.Random(seed)
    t = placement.topology
    H = params.hops
    acts = []
    for b in sorted(placement.byzantine):
        own = b"X%d" % b
        for w in t.adj[b]:
            near = sorted({x for y in t.adj[w] for x in t.adj[y]} | set(t.adj[w]))
            msgs = [Standard(FORGED), Standard(own), Trigger(FORGED, frozenset())]
            for _ in range(per_edge):
                m = rng.choice((FORGED, own, placement.payload))
                size = rng.randint(0, H + 1)
                S = frozenset(rng.sample(near, min(size, len(near))))
                msgs.append(rng.choice((Standard(m), Trigger(m, S))))
            msgs.append(Trigger(FORGED, frozenset({b})))  # sender inside S
            msgs.append(Trigger(FORGED, frozenset({t.n + 7})))  # unknown id
            msgs.append(Standard(b""))  # empty payload
            for msg in msgs:
                acts.append(Action(rng.randrange(horizon), b, w, msg))
    acts.sort(key=lambda a: a.step)
    return ByzantineScript(tuple(acts), "flood")


STRATEGIES = ("silent", "flood", "theorem2")


def make_strategy(name: str, placement: Placement, params: ProtocolParams, seed: int) -> ByzantineScript:
    if name == "silent":
        return silent()
    if name == "flood":
        return flood(placement, params, seed)
    if name == "theorem2":
        return collusion(placement)
    raise InvalidParameter(f"unknown strategy {name!r}; choose from {', '.join(STRATEGIES)}")


# -- scheduling --------------------------------------------------------------


@dataclass(frozen=True)
class Scheduler:
    """``random``: uniform choice among in-flight triples (fair).
    ``fifo``: oldest first.  ``scripted``: follow ``order``, a list of
    ``(sender, receiver)`` channels, oldest message on the channel first; an
    entry whose channel is empty is skipped, and FIFO takes over at the end.
    """

    kind: str = "random"
    seed: int = 0
    order: tuple = ()

    def __post_init__(self):
        if self.kind not in ("random", "fifo", "scripted"):
            raise InvalidParameter(f"unknown scheduler {self.kind!r}")

    def to_json(self) -> dict:
        d = {"kind": self.kind, "seed": self.seed}
        if self.order:
            d["order"] = [list(c) for c in self.order]
        return d

    @classmethod
    def from_json(cls, d: dict) -> "Scheduler":
        return cls(d["kind"], d.get("seed", 0), tuple(tuple(c) for c in d.get("order", ())))


class _InFlight:
    def __init__(self, sched: Scheduler):
        self.kind = sched.kind
        self.rng = random.Random(sched.seed)
        self.order = deque(sched.order)
        self.items: list | deque = deque() if sched.kind == "fifo" else []

    def __len__(self):
        return len(self.items)

    def push(self, item):
        self.items.append(item)

    def pop(self):
        items = self.items
        if self.kind == "fifo":
            return items.popleft()
        if self.kind == "random":
            k = self.rng.randrange(len(items))
            items[k], items[-1] = items[-1], items[k]
            return items.pop()
        while self.order:
            chan = self.order.popleft()
            for k, (_, frm, to) in enumerate(items):
                if (frm, to) == tuple(chan):
                    return items.pop(k)
        return items.pop(0)


# -- traces ------------------------------------------------------------------


@dataclass
class ExecutionTrace:
    events: list = field(default_factory=list)
    delivered: dict = field(default_factory=dict)  # correct node -> frozenset of payloads
    quiescent: bool = False
    steps: int = 0
    seed: int = 0
    scheduler: str = "random"
    sends: int = 0
    receives: int = 0
    meta: dict = field(default_factory=dict)

    def delivered_authentic(self, payload: bytes) -> set[int]:
        return {v for v, ms in self.delivered.items() if payload in ms}

    def to_jsonl(self) -> str:
        head = {"kind": "meta", **self.meta, "seed": self.seed, "scheduler_kind": self.scheduler}
        tail = {
            "kind": "end",
            "steps": self.steps,
            "quiescent": self.quiescent,
            "delivered": {str(v): sorted(_pl(m) for m in ms) for v, ms in sorted(self.delivered.items())},
        }
        lines = [json.dumps(head, sort_keys=True)]
        lines += [json.dumps(e, sort_keys=True) for e in self.events]
        lines.append(json.dumps(tail, sort_keys=True))
        return "\n".join(lines) + "\n"


def default_step_cap(t: Topology, params: ProtocolParams, n_payloads: int) -> int:
    max_deg = max((len(a) for a in t.adj), default=1)
    return 64 * t.n * max(1, n_payloads) * (1 + max_deg) ** (params.hops + 1)


def run_execution(
    placement: Placement,
    params: ProtocolParams,
    scheduler: Scheduler = Scheduler(),
    script: ByzantineScript = ByzantineScript(),
    step_cap: int | None = None,
    record: bool = True,
) -> ExecutionTrace:
    t = placement.topology
    script.validate(placement)
    byz = placement.byzantine
    src = placement.source
    id_bound = t.n

    events: list = []
    emit = events.append if record else None

    def ev(step, kind, node, peer, msg):
        emit({"step": step, "kind": kind, "node": node, "peer": peer, "msg": msg})

    flight = _InFlight(scheduler)
    n_sent = 0

    def multicast(step, v, msgs):
        nonlocal n_sent
        for msg in msgs:
            for w in t.adj[v]:
                flight.push((msg, v, w))
                n_sent += 1
                if record:
                    ev(step, "send", v, w, msg_to_json(msg))

    def deliveries(step, v, payloads):
        if record:
            for m in payloads:
                ev(step, "deliver", v, None, {"payload": _pl(m)})

    states: dict[int, P.NodeState] = {}
    for v in t.nodes():
        if v in byz:
            continue
        if v == src:
            tr = P.init_source(v, t.adj[v], placement.payload, params, id_bound)
            states[v] = tr.state
            deliveries(0, v, tr.delivered)
            multicast(0, v, tr.sends)
        else:
            states[v] = P.new_node(v, t.adj[v], id_bound)

    pending = deque(sorted(script.actions, key=lambda a: a.step))
    payloads = {placement.payload} | {a.msg.payload for a in script.actions}
    cap = step_cap if step_cap is not None else default_step_cap(t, params, len(payloads))

    step = 0
    n_recv = 0
    while step < cap:
        if not flight and pending:
            step = max(step, pending[0].step)
        while pending and pending[0].step <= step:
            a = pending.popleft()
            flight.push((a.msg, a.sender, a.to))
            n_sent += 1
            if record:
                ev(step, "send", a.sender, a.to, msg_to_json(a.msg))
        if not flight:
            break
        msg, frm, to = flight.pop()
        n_recv += 1
        if record:
            ev(step, "recv", to, frm, msg_to_json(msg))
        if to not in byz:
            st = states[to]
            if not P.admissible(st, params, msg, frm):
                if record:
                    ev(step, "discard", to, frm, msg_to_json(msg))
            else:
                if isinstance(msg, Standard):
                    tr = P.on_standard(st, params, msg.payload, frm, frm == src)
                else:
                    tr = P.on_trigger(st, params, msg.payload, msg.visited, frm)
                states[to] = tr.state
                deliveries(step, to, tr.delivered)
                multicast(step, to, tr.sends)
        step += 1

    return ExecutionTrace(
        events=events,
        delivered={v: s.delivered for v, s in states.items()},
        quiescent=not flight and not pending,
        steps=step,
        seed=scheduler.seed,
        scheduler=scheduler.kind,
        sends=n_sent,
        receives=n_recv,
        meta={
            "topology": t.to_spec(),
            "source": src,
            "byzantine": sorted(byz),
            "payload": _pl(placement.payload),
            "hops": params.hops,
            "scheduler": scheduler.to_json(),
            "script": script.to_json(),
            "step_cap": cap,
        },
    )


# -- verdicts ----------------------------------------------------------------


@dataclass(frozen=True)
class SafetyVerdict:
    violations: tuple = ()  # ((node, payload), ...)

    @property
    def safe(self) -> bool:
        return not self.violations

    @property
    def node(self):
        return self.violations[0][0] if self.violations else None

    @property
    def payload(self):
        return self.violations[0][1] if self.violations else None

    def __str__(self):
        if self.safe:
            return "safe"
        return "violated(%s, %r)" % (self.node, self.payload)


def check_safety(trace: ExecutionTrace, placement: Placement) -> SafetyVerdict:
    bad = []
    for v in sorted(trace.delivered):
        if v in placement.byzantine:
            continue
        for m in sorted(trace.delivered[v]):
            if m != placement.payload:
                bad.append((v, m))
    return SafetyVerdict(tuple(bad))


def replay_theorem2_attack(
    hops: int, gap: int | None = None, scheduler: Scheduler = Scheduler()
) -> tuple[Placement, ByzantineScript, ExecutionTrace]:
    """Collusion of two Byzantine nodes ``gap`` hops apart on a path (default ``hops + 1``).

    The path is ``p0 .. p_gap`` with ``p0`` and ``p_gap`` Byzantine; the
    source hangs off ``p1`` as an extra leaf.  ``p0`` sends the forged
    standard message to ``p1`` and ``p_gap`` starts the forged trigger towards
    ``p_{gap-1}``.
    """
    params = ProtocolParams(hops)
    gap = hops + 1 if gap is None else gap
    if gap < 2:
        raise InvalidParameter("the two Byzantine endpoints need a correct node between them")
    n_path = gap + 1
    src = n_path
    t = from_edges(n_path + 1, [(k, k + 1) for k in range(gap)] + [(1, src)])
    placement = Placement(t, src, frozenset({0, gap}))
    script = ByzantineScript(
        (
            Action(0, 0, 1, Standard(FORGED)),
            Action(0, gap, gap - 1, Trigger(FORGED, frozenset())),
        ),
        "theorem2",
    )
    trace = run_execution(placement, params, scheduler, script)
    return placement, script, trace


# -- trace files --------------------------------------------------------------


def read_trace(lines: Iterable[str]) -> tuple[dict, list, dict]:
    """Split a JSON-lines trace into ``(meta, events, end)``."""
    rows = [json.loads(line) for line in lines if line.strip()]
    if not rows or rows[0].get("kind") != "meta" or rows[-1].get("kind") != "end":
        raise ValueError("trace must start with a meta record and end with an end record")
    return rows[0], rows[1:-1], rows[-1]


def verify_trace_events(events: list, end: dict) -> list[str]:
    """Internal consistency: receives match earlier sends, deliveries match the summary."""
    problems = []
    outstanding: dict = {}
    delivered: dict = {}
    for e in events:
        key = (e["node"], e["peer"], json.dumps(e["msg"], sort_keys=True))
        if e["kind"] == "send":
            outstanding[key] = outstanding.get(key, 0) + 1
        elif e["kind"] == "recv":
            skey = (e["peer"], e["node"], key[2])
            if outstanding.get(skey, 0) <= 0:
                problems.append(f"step {e['step']}: receive without matching send {skey}")
            else:
                outstanding[skey] -= 1
        elif e["kind"] == "deliver":
            delivered.setdefault(str(e["node"]), set()).add(e["msg"]["payload"])
    summary = {k: set(v) for k, v in end.get("delivered", {}).items() if v}
    if summary != delivered:
        problems.append("delivered summary disagrees with deliver events")
    return problems


def rerun_from_meta(meta: dict) -> ExecutionTrace:
    t = from_spec(meta["topology"])
    placement = Placement(t, meta["source"], frozenset(meta["byzantine"]), meta["payload"].encode("latin-1"))
    return run_execution(
        placement,
        ProtocolParams(meta["hops"]),
        Scheduler.from_json(meta["scheduler"]),
        ByzantineScript.from_json(meta["script"]),
        step_cap=meta.get("step_cap"),
    )
