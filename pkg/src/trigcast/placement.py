from __future__ import annotations

from dataclasses import dataclass

from .topology import InvalidParameter, Topology

DEFAULT_PAYLOAD = b"m"


@dataclass(frozen=True)
class Placement:
    """Source, Byzantine set and authentic payload over a topology."""

    topology: Topology
    source: int
    byzantine: frozenset[int] = frozenset()
    payload: bytes = DEFAULT_PAYLOAD

    def __post_init__(self):
        t = self.topology
        object.__setattr__(self, "source", t.check_node(self.source))
        object.__setattr__(self, "byzantine", frozenset(t.check_node(b) for b in self.byzantine))
        if self.source in self.byzantine:
            raise InvalidParameter("the source must be correct")

    def is_correct(self, v: int) -> bool:
        return v not in self.byzantine

    def correct_nodes(self) -> list[int]:
        return [v for v in self.topology.nodes() if v not in self.byzantine]
