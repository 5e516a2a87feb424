"""Network graphs: grids, tori and explicit edge lists.

Nodes are dense integers ``0 .. n-1``.  Generated grids and tori number the
coordinate pair ``(i, j)`` (1-based, row-major) as ``(i - 1) * N + (j - 1)``.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

INF = math.inf


class InvalidParameter(ValueError):
    pass


class InvalidNode(ValueError):
    pass


class TopologyParseError(ValueError):
    """Malformed topology file; ``line``/``col`` point at the offending spot when known."""

    def __init__(self, msg: str, line: int | None = None, col: int | None = None):
        where = f" (line {line}, column {col})" if line is not None else ""
        super().__init__(msg + where)
        self.line = line
        self.col = col


@dataclass(frozen=True, eq=False)
class Topology:
    """Immutable undirected graph.

    ``adj[v]`` is the sorted tuple of neighbours of ``v``.  ``kind`` is one of
    ``grid``, ``torus`` or ``custom``; ``side`` is ``N`` for generated graphs.
    """

    adj: tuple[tuple[int, ...], ...]
    kind: str = "custom"
    side: int | None = None

    @property
    def n(self) -> int:
        return len(self.adj)

    def nodes(self) -> range:
        return range(len(self.adj))

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self.adj[self.check_node(v)]

    def degree(self, v: int) -> int:
        return len(self.neighbors(v))

    def check_node(self, v) -> int:
        if not isinstance(v, (int, np.integer)) or not 0 <= v < len(self.adj):
            raise InvalidNode(f"unknown node {v!r}")
        return int(v)

    def edges(self) -> list[tuple[int, int]]:
        return [(a, b) for a, nbrs in enumerate(self.adj) for b in nbrs if a < b]

    # -- coordinates ------------------------------------------------------

    def node_at(self, i: int, j: int) -> int:
        if self.side is None:
            raise InvalidParameter("coordinates only exist on grid/torus topologies")
        N = self.side
        if not (1 <= i <= N and 1 <= j <= N):
            raise InvalidNode(f"coordinate ({i},{j}) outside 1..{N}")
        return (i - 1) * N + (j - 1)

    def coords(self, v: int) -> tuple[int, int]:
        if self.side is None:
            raise InvalidParameter("coordinates only exist on grid/torus topologies")
        v = self.check_node(v)
        return v // self.side + 1, v % self.side + 1

    def label(self, v: int):
        """Human-readable name: ``(i, j)`` on generated graphs, the id otherwise."""
        return self.coords(v) if self.side is not None else v

    def parse_node(self, text: str) -> int:
        text = text.strip()
        if "," in text:
            i, j = (int(x) for x in text.split(","))
            return self.node_at(i, j)
        return self.check_node(int(text))

    def offset(self, v: int, di: int, dj: int) -> int:
        """Node displaced by ``(di, dj)`` from ``v``, wrapping on a torus."""
        i, j = self.coords(v)
        N = self.side
        if self.kind == "torus":
            return self.node_at((i - 1 + di) % N + 1, (j - 1 + dj) % N + 1)
        return self.node_at(i + di, j + dj)

    def metric_distance(self, a: int, b: int) -> int:
        """Closed-form hop distance on generated grids and tori."""
        (i1, j1), (i2, j2) = self.coords(a), self.coords(b)
        di, dj = abs(i1 - i2), abs(j1 - j2)
        if self.kind == "torus":
            return min(di, self.side - di) + min(dj, self.side - dj)
        if self.kind == "grid":
            return di + dj
        raise InvalidParameter("closed-form distance needs a grid or torus")

    # -- serialization ----------------------------------------------------

    def to_spec(self) -> dict:
        if self.kind in ("grid", "torus"):
            return {"kind": self.kind, "n": self.side}
        return {"kind": "custom", "nodes": self.n, "edges": [list(e) for e in self.edges()]}

    def to_edge_list(self) -> dict:
        return {"kind": "custom", "nodes": self.n, "edges": [list(e) for e in self.edges()]}

    @cached_property
    def csr(self) -> tuple[np.ndarray, np.ndarray]:
        """``(indptr, indices)`` arrays for the compiled kernels."""
        indptr = np.zeros(self.n + 1, dtype=np.int64)
        indptr[1:] = np.cumsum([len(a) for a in self.adj])
        indices = np.fromiter((b for a in self.adj for b in a), dtype=np.int64, count=int(indptr[-1]))
        return indptr, indices


def _lattice(N: int, wrap: bool, kind: str) -> Topology:
    adj = []
    for i in range(N):
        for j in range(N):
            nbrs = set()
            for di, dj in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                a, b = i + di, j + dj
                if wrap:
                    a, b = a % N, b % N
                elif not (0 <= a < N and 0 <= b < N):
                    continue
                nbrs.add(a * N + b)
            adj.append(tuple(sorted(nbrs)))
    return Topology(tuple(adj), kind=kind, side=N)


def make_grid(N: int) -> Topology:
    if not isinstance(N, int) or N < 2:
        raise InvalidParameter(f"grid side must be >= 2, got {N!r}")
    return _lattice(N, wrap=False, kind="grid")


def make_torus(N: int) -> Topology:
    if not isinstance(N, int) or N < 3:
        raise InvalidParameter(f"torus side must be >= 3, got {N!r}")
    return _lattice(N, wrap=True, kind="torus")


def from_edges(n_nodes: int, edges: Iterable[Sequence[int]]) -> Topology:
    """Custom topology from 0-based undirected edges; rejects self-loops and repeats."""
    if not isinstance(n_nodes, int) or n_nodes < 1:
        raise InvalidParameter(f"node count must be a positive integer, got {n_nodes!r}")
    adj: list[set[int]] = [set() for _ in range(n_nodes)]
    for e in edges:
        if len(e) != 2:
            raise InvalidParameter(f"edge must have two endpoints: {e!r}")
        a, b = e
        if not all(isinstance(x, int) and 0 <= x < n_nodes for x in (a, b)):
            raise InvalidParameter(f"edge {e!r} references an unknown node")
        if a == b:
            raise InvalidParameter(f"self-loop on node {a}")
        if b in adj[a]:
            raise InvalidParameter(f"duplicate edge {a}-{b}")
        adj[a].add(b)
        adj[b].add(a)
    return Topology(tuple(tuple(sorted(s)) for s in adj))


def path_graph(n_nodes: int) -> Topology:
    return from_edges(n_nodes, [(k, k + 1) for k in range(n_nodes - 1)])


def from_spec(spec: dict) -> Topology:
    kind = spec.get("kind")
    if kind == "grid":
        return make_grid(spec.get("n"))
    if kind == "torus":
        return make_torus(spec.get("n"))
    if kind == "custom":
        return from_edges(spec.get("nodes"), [tuple(e) for e in spec.get("edges", [])])
    raise InvalidParameter(f"unknown topology kind {kind!r}")


def load_topology(path: str | Path) -> Topology:
    text = Path(path).read_text()
    try:
        spec = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TopologyParseError(exc.msg, exc.lineno, exc.colno) from exc
    if not isinstance(spec, dict):
        raise TopologyParseError("topology file must hold a JSON object", 1, 1)
    try:
        return from_spec(spec)
    except (InvalidParameter, TypeError) as exc:
        raise TopologyParseError(str(exc)) from exc


# -- queries ---------------------------------------------------------------


def bfs_distances(t: Topology, src: int) -> list[float]:
    dist: list[float] = [INF] * t.n
    dist[src] = 0
    queue = deque([src])
    while queue:
        u = queue.popleft()
        for w in t.adj[u]:
            if dist[w] == INF:
                dist[w] = dist[u] + 1
                queue.append(w)
    return dist


def hop_distance(t: Topology, a: int, b: int) -> float:
    """Shortest path length in hops (``inf`` when disconnected)."""
    a, b = t.check_node(a), t.check_node(b)
    if a == b:
        return 0
    return bfs_distances(t, a)[b]


def exists_bounded_correct_path(
    t: Topology,
    byzantine,
    start: int,
    targets: Iterable[int],
    max_hops: int,
    excluded: int | None = None,
) -> bool:
    """Is there a simple path of at most ``max_hops`` hops from ``start`` to a target,
    using only correct nodes and never touching ``excluded``?

    ``byzantine`` is a set of node ids or anything with a ``byzantine``
    attribute (a placement).  Plain depth-limited enumeration: path nodes must
    be distinct, so ordinary reachability would over-approximate.
    """
    bad = set(getattr(byzantine, "byzantine", byzantine))
    goal = set(targets)
    goal.discard(excluded)
    if not goal or start in bad or start == excluded:
        return False
    if start in goal:
        return True

    on_path = {start}

    def dfs(u: int, depth: int) -> bool:
        for w in t.adj[u]:
            if w in on_path or w in bad or w == excluded:
                continue
            if w in goal:
                return True
            if depth + 1 < max_hops:
                on_path.add(w)
                if dfs(w, depth + 1):
                    return True
                on_path.discard(w)
        return False

    return dfs(start, 0)
