"""Oriented ring topology, node-local stores, and run configuration.

The ring is the set of node indices 0..n-1.  Clockwise is index-increasing;
counter-clockwise is index-decreasing.  All protocol movement is expressed in
these two directions.  Each node owns a store: a pebble count (pebble model)
and a whiteboard (whiteboard model) holding at most one record per kind.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum, IntEnum
from typing import NamedTuple, Optional, Sequence, Tuple


class Direction(IntEnum):
    CW = 1
    CCW = -1


def flip(direction: Direction) -> Direction:
    return Direction(-int(direction))


def neighbor(index: int, direction: Direction, n: int) -> int:
    """Next node index one hop along `direction` on a ring of n nodes."""
    return (index + int(direction)) % n


def clockwise_distance(src: int, dst: int, n: int) -> int:
    """Hops d in [0, n) with (src + d) mod n == dst."""
    return (dst - src) % n


class CommModel(Enum):
    F2F = "f2f"
    PEBBLE = "pebble"
    WHITEBOARD = "whiteboard"


class DirMessage(NamedTuple):
    """A stored travel-direction report: which way the lost agent was moving,
    plus an optional agent id used to locate the gathering target."""

    direction: Direction
    agent_id: Optional[int]


class NodeStore(NamedTuple):
    """Per-node storage.

    `pebbles` is the movable-token count (pebble model only).  The remaining
    fields are the whiteboard: one slot per record kind, so capacity is
    structurally bounded (each slot holds an id or a constant tag).
    `pebble_marks` backs the whiteboard simulation of pebbles.
    """

    pebbles: int = 0
    home_id: Optional[int] = None
    visited_id: Optional[int] = None
    dir_msg: Optional[DirMessage] = None
    marking: Optional[str] = None  # "left" | "right"
    pebble_marks: int = 0

    def whiteboard_empty(self) -> bool:
        return (
            self.home_id is None
            and self.visited_id is None
            and self.dir_msg is None
            and self.marking is None
            and self.pebble_marks == 0
        )


EMPTY_STORE = NodeStore()

MARK_LEFT = "left"
MARK_RIGHT = "right"

# Whiteboard write ops.  Writing a record replaces the record of the same
# kind; a direction marking replaces the opposite marking.
WB_SET_HOME = "set_home"
WB_SET_VISITED = "set_visited"
WB_SET_DIR = "set_dir"
WB_SET_MARKING = "set_marking"
WB_CLEAR_ALL = "clear_all"


def write_message(store: NodeStore, op: Tuple) -> NodeStore:
    """Apply one whiteboard op to a store, returning the new store.

    Ops are tuples: ("set_home", id), ("set_visited", id),
    ("set_dir", Direction, id_or_None), ("set_marking", "left"|"right"),
    ("clear_all",).
    """
    kind = op[0]
    if kind == WB_SET_HOME:
        return store._replace(home_id=op[1])
    if kind == WB_SET_VISITED:
        return store._replace(visited_id=op[1])
    if kind == WB_SET_DIR:
        return store._replace(dir_msg=DirMessage(op[1], op[2]))
    if kind == WB_SET_MARKING:
        if op[1] not in (MARK_LEFT, MARK_RIGHT):
            raise ValueError(f"bad marking {op[1]!r}")
        return store._replace(marking=op[1])
    if kind == WB_CLEAR_ALL:
        return NodeStore(pebbles=store.pebbles)
    raise ValueError(f"unknown whiteboard op {op!r}")


PROTOCOLS = ("f2f", "pbl-coloc", "pbl-scat", "wb-scat", "wb-coloc")

PROTOCOL_COMM = {
    "f2f": CommModel.F2F,
    "pbl-coloc": CommModel.PEBBLE,
    "pbl-scat": CommModel.PEBBLE,
    "wb-scat": CommModel.WHITEBOARD,
    "wb-coloc": CommModel.WHITEBOARD,
}


class ConfigError(ValueError):
    """Invalid run configuration (bad placement, size, protocol mismatch)."""


@dataclass(frozen=True)
class RingConfig:
    """Everything that defines one simulation instance."""

    n: int
    bh_index: int
    placement: Tuple[Tuple[int, int], ...]  # (agent_id, node_index) pairs
    protocol: str
    comm_model: CommModel = field(init=False)

    def __post_init__(self):
        if self.protocol not in PROTOCOLS:
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        object.__setattr__(self, "comm_model", PROTOCOL_COMM[self.protocol])
        if self.n < 4:
            raise ConfigError("ring size must be at least 4")
        if not 0 <= self.bh_index < self.n:
            raise ConfigError("black hole index out of range")
        ids = [a for a, _ in self.placement]
        if len(set(ids)) != len(ids):
            raise ConfigError("agent ids must be distinct")
        if sorted(ids) != list(range(1, len(ids) + 1)):
            raise ConfigError("agent ids must be 1..k")
        for aid, node in self.placement:
            if not 0 <= node < self.n:
                raise ConfigError(f"agent {aid} placed off-ring at {node}")
            if node == self.bh_index:
                raise ConfigError(
                    f"agent {aid} starts on the black hole node {node}"
                )
        self._validate_protocol_shape()

    def _validate_protocol_shape(self):
        k = len(self.placement)
        nodes = {node for _, node in self.placement}
        if self.protocol == "f2f":
            if k < 3:
                raise ConfigError("f2f needs at least 3 agents")
            if len(nodes) != 1:
                raise ConfigError("f2f agents must be co-located")
        elif self.protocol in ("pbl-coloc", "wb-coloc"):
            if k != 3:
                raise ConfigError(f"{self.protocol} needs exactly 3 agents")
            if len(nodes) != 1:
                raise ConfigError(f"{self.protocol} agents must be co-located")
        elif self.protocol == "pbl-scat":
            if k != 4:
                raise ConfigError("pbl-scat needs exactly 4 agents")
            if len(nodes) < 2:
                raise ConfigError(
                    "pbl-scat placement must span at least 2 nodes"
                    " (fully co-located agents should run pbl-coloc)"
                )
        elif self.protocol == "wb-scat":
            if k != 3:
                raise ConfigError("wb-scat needs exactly 3 agents")
            if len(nodes) < 2:
                raise ConfigError(
                    "wb-scat placement must span at least 2 nodes"
                    " (fully co-located agents should run wb-coloc)"
                )

    @property
    def agent_ids(self) -> Tuple[int, ...]:
        return tuple(sorted(a for a, _ in self.placement))

    def start_of(self, agent_id: int) -> int:
        for aid, node in self.placement:
            if aid == agent_id:
                return node
        raise KeyError(agent_id)


def spread_placement(n: int, k: int, bh_index: int) -> Tuple[Tuple[int, int], ...]:
    """Maximally spread k agents over the ring, avoiding the black hole.

    Agents that would land on the black hole are nudged one node clockwise
    (and onward past any collision), deterministically.
    """
    taken = set()
    placement = []
    for i in range(k):
        node = (i * n) // k
        while node == bh_index or node in taken:
            node = (node + 1) % n
        taken.add(node)
        placement.append((i + 1, node))
    return tuple(placement)


def colocated_placement(k: int, node: int = 0) -> Tuple[Tuple[int, int], ...]:
    return tuple((i + 1, node) for i in range(k))
