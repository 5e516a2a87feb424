"""Per-node state machine of the trigger-based broadcast.

Each correct node keeps a ``wait`` set of standard messages ``(m, q)`` heard
from non-source neighbours and a ``trig`` set of trigger records ``(m, S)``.
A payload is delivered once some ``(m, q)`` in ``wait`` and ``(m, S)`` in
``trig`` have ``q`` outside ``S``.

All transitions are pure: they take a frozen :class:`NodeState` and return a
:class:`Transition` holding the successor state, the messages to multicast and
the payloads delivered by this step.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple, Union


class ProtocolViolation(RuntimeError):
    """The harness fed a node a message from a non-neighbour."""


@dataclass(frozen=True)
class Standard:
    payload: bytes


@dataclass(frozen=True)
class Trigger:
    payload: bytes
    visited: frozenset = frozenset()


Message = Union[Standard, Trigger]


@dataclass(frozen=True)
class ProtocolParams:
    hops: int = 2
    max_payload: int = 256

    def __post_init__(self):
        if not isinstance(self.hops, int) or self.hops < 1:
            raise ValueError(f"hop bound must be an integer >= 1, got {self.hops!r}")
        if self.max_payload < 1:
            raise ValueError("payload cap must be positive")


@dataclass(frozen=True)
class NodeState:
    node: int
    neighbors: frozenset
    is_source: bool = False
    wait: frozenset = frozenset()  # {(payload, sender)}
    trig: frozenset = frozenset()  # {(payload, frozenset of ids)}
    delivered: frozenset = frozenset()
    sent: frozenset = frozenset()  # messages already multicast
    id_bound: int | None = None  # ids outside range(id_bound) mark a trigger as malformed


class Transition(NamedTuple):
    state: NodeState
    sends: tuple = ()
    delivered: tuple = ()


def valid_payload(params: ProtocolParams, m) -> bool:
    return isinstance(m, bytes) and 0 < len(m) <= params.max_payload


def new_node(node: int, neighbors: Iterable[int], id_bound: int | None = None) -> NodeState:
    return NodeState(node=node, neighbors=frozenset(neighbors), id_bound=id_bound)


def init_source(
    node: int,
    neighbors: Iterable[int],
    m: bytes,
    params: ProtocolParams = ProtocolParams(),
    id_bound: int | None = None,
) -> Transition:
    """Source start-up: deliver ``m`` and multicast ``(m)`` and ``(m, {})``."""
    if not valid_payload(params, m):
        raise ValueError(f"invalid payload {m!r}: need 1..{params.max_payload} bytes")
    state = NodeState(node=node, neighbors=frozenset(neighbors), is_source=True, id_bound=id_bound)
    return _deliver(state, m)


def _multicast(state: NodeState, msgs: Iterable[Message]) -> tuple[NodeState, tuple]:
    fresh = tuple(msg for msg in msgs if msg not in state.sent)
    if fresh:
        state = replace(state, sent=state.sent.union(fresh))
    return state, fresh


def _deliver(state: NodeState, m: bytes) -> Transition:
    state = replace(state, delivered=state.delivered | {m})
    state, sends = _multicast(state, (Standard(m), Trigger(m, frozenset())))
    return Transition(state, sends, (m,))


def _check_sender(state: NodeState, sender: int) -> None:
    if sender not in state.neighbors:
        raise ProtocolViolation(f"node {state.node} got a message from non-neighbour {sender}")


def admissible(state: NodeState, params: ProtocolParams, msg: Message, sender: int) -> bool:
    """Whether the reception rules act on ``msg`` at all (the rest is discarded)."""
    if state.is_source or not valid_payload(params, msg.payload):
        return False
    if isinstance(msg, Trigger):
        S = msg.visited
        # a trigger that already passed through this node is a cycle, not a path
        if sender in S or state.node in S or len(S) > params.hops - 1:
            return False
        if state.id_bound is not None and any(
            not isinstance(x, int) or not 0 <= x < state.id_bound for x in S
        ):
            return False
    return True


def on_standard(
    state: NodeState,
    params: ProtocolParams,
    m: bytes,
    sender: int,
    sender_is_source: bool,
) -> Transition:
    _check_sender(state, sender)
    if not admissible(state, params, Standard(m), sender):
        return Transition(state)
    if sender_is_source:
        if m in state.delivered:
            return Transition(state)
        return _deliver(state, m)
    if (m, sender) in state.wait:
        return Transition(state)
    state = replace(state, wait=state.wait | {(m, sender)})
    return try_decide(state, (m,))


def on_trigger(
    state: NodeState,
    params: ProtocolParams,
    m: bytes,
    visited: frozenset,
    sender: int,
) -> Transition:
    _check_sender(state, sender)
    visited = frozenset(visited)
    if not admissible(state, params, Trigger(m, visited), sender):
        return Transition(state)
    record = visited | {sender}
    if (m, record) not in state.trig:
        state = replace(state, trig=state.trig | {(m, record)})
    state, sends = _multicast(state, (Trigger(m, record),))
    step = try_decide(state, (m,))
    return Transition(step.state, sends + step.sends, step.delivered)


def try_decide(state: NodeState, payloads: Iterable[bytes] | None = None) -> Transition:
    """Deliver every not-yet-delivered payload that has a witness pair.

    ``payloads`` restricts the scan; ``None`` checks everything in ``wait``.
    """
    if payloads is None:
        payloads = {m for m, _ in state.wait}
    sends: tuple = ()
    delivered: tuple = ()
    for m in sorted(set(payloads)):
        if m in state.delivered:
            continue
        senders = [q for (x, q) in state.wait if x == m]
        if not senders:
            continue
        if any(q not in S for (x, S) in state.trig if x == m for q in senders):
            step = _deliver(state, m)
            state = step.state
            sends += step.sends
            delivered += step.delivered
    return Transition(state, sends, delivered)
