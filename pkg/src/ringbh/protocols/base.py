"""Shared protocol machinery.

A protocol is a pure transition table: step(state, snapshot, agent_id)
returns the next machine state and this round's action.  Protocol state
objects are immutable and hashable so the model checker can memoize whole
global states.
"""

from __future__ import annotations

from typing import Dict, Optional, Tuple

from ..engine import Action, ProtocolIntegrityError, Snapshot
from ..ring import Direction, RingConfig


def explore_move(pos: int, avoid: int, xdir: int, n: int) -> Tuple[int, Direction]:
    """One step of the fixed perpetual-exploration cycle that avoids one
    node: sweep one way until the next hop would land on it, then reverse.
    Visits every other node with period at most 2n.  If currently standing
    on the avoided node (just after claiming it), keep moving off it."""
    if pos == avoid:
        return xdir, Direction(xdir)
    nxt = (pos + xdir) % n
    if nxt == avoid:
        xdir = -xdir
    return xdir, Direction(xdir)


class Protocol:
    """Base class; concrete protocols bind the ring size and an optional
    mutation hook (deliberate bug used to prove the checker can fail)."""

    name: str = ""
    mutations: Tuple[str, ...] = ()

    def __init__(self, config: RingConfig, mutation: Optional[str] = None):
        if mutation is not None and mutation not in self.mutations:
            raise ValueError(
                f"protocol {self.name} does not support mutation {mutation!r}"
            )
        self.config = config
        self.n = config.n
        self.mutation = mutation

    # Engine hooks -----------------------------------------------------

    def initial_agent_state(self, agent_id: int):
        raise NotImplementedError

    def initial_node_pebbles(self) -> Dict[int, int]:
        return {}

    def initial_carried(self, agent_id: int) -> int:
        return 0

    def step(self, state, snap: Snapshot, agent_id: int):
        raise NotImplementedError

    def state_payload(self, state) -> Tuple[Tuple[str, str], ...]:
        return ()

    # Verification metadata --------------------------------------------

    @property
    def period(self) -> int:
        raise NotImplementedError

    @property
    def coverage_window(self) -> int:
        return self.period

    @property
    def recovery_rounds(self) -> int:
        """Upper bound on rounds of legitimately degraded coverage after an
        anomaly (death or detection claim) while survivors re-stabilize:
        checkpoint waits, gathering walks, and the first full tour of the
        post-anomaly regime.  Coverage obligations resume after this."""
        return 2 * self.period

    # State the protocol is in at the start of every full cycle, used by
    # the periodicity checker.
    sync_machine: str = ""


def rank_of(agent_id: int, ids) -> int:
    ordered = sorted(ids)
    return ordered.index(agent_id)
