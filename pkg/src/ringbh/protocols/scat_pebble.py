"""Four scattered agents with one pebble each: segment patrol, then gather.

Each agent owns the clockwise segment from its home to the next home.  All
agents cycle in lockstep (cycle length 3n+2): walk the segment clockwise
(Forward), idle at its far end until round n of the cycle (Wait1), carry the
pebble found there back home (Fetch, re-entering home at round n+size+1),
then sit out the rest of the cycle (Wait2) and start over at round 3n+2.

The pebble economy is a counter-clockwise rotation: every cycle each agent
exports the pebble lying at its segment end and imports one to its home.  A
destroyed agent stops exporting, so within a cycle or two its clockwise
neighbour comes home to find more pebbles than agents there: the anomaly.
The first agent to see it (Gather1) waits until every survivor is parked in
Wait2, then sweeps clockwise collecting pebbles and agents (Gather2) until
three agents stand together; they re-declare that node home and run the
co-located relay protocol from there.

Initial multiplicities: at a node with two agents only the lowest id walks;
the other sits (Backup-Wait), checking for the pebble surplus at round 2n+2
of each cycle.  A node with three agents runs the co-located relay outright;
the leftover fourth agent parks at its home for good, keeping its pebble in
hand so the stray token can never confuse a pebble search.
"""

from __future__ import annotations

from typing import Dict, NamedTuple, Optional, Tuple

from ..engine import Action, IDLE, ProtocolIntegrityError, Snapshot
from ..ring import Direction, RingConfig
from .base import Protocol
from .coloc_pebble import ColocPebbleProtocol, ColocState, INITIAL as COLOC_INITIAL

INITIAL1 = "Initial1"
FORWARD = "Forward"
WAIT1 = "Wait1"
FETCH = "Fetch"
WAIT2 = "Wait2"
GATHER1 = "Gather1"
GATHER2 = "Gather2"
BACKUP_WAIT = "Backup-Wait"
BACKUP = "Backup"
COLOC = "Coloc"
IDLE_FOREVER = "Idle"

MOVE_CW = Action(move=Direction.CW)
MOVE_CCW = Action(move=Direction.CCW)
SWEEP_CW = Action(move=Direction.CW, pick_all=True)


class ScatState(NamedTuple):
    machine: str
    home: int
    size: int = 0  # clockwise distance to the nearest neighbouring home
    s: int = 0  # 0 until the first segment walk has measured size
    ct: int = -1  # rounds since this cycle's Forward entry


def multiplicity_dispatch(placement) -> Dict[int, str]:
    """Start machine per agent for scattered placements with multiplicities.

    Singletons walk.  At a double, the lowest id walks and the other sits as
    backup.  A triple runs the co-located relay immediately; the fourth agent
    parks forever (the relay trio is already sufficient on its own).
    """
    by_node: Dict[int, list] = {}
    for aid, node in placement:
        by_node.setdefault(node, []).append(aid)
    if any(len(ids) >= 4 for ids in by_node.values()):
        raise ValueError("fully co-located agents should run the co-located protocol")
    start: Dict[int, str] = {}
    triple = next((ids for ids in by_node.values() if len(ids) == 3), None)
    if triple is not None:
        for aid, node in placement:
            start[aid] = COLOC if aid in triple else IDLE_FOREVER
        return start
    for node, ids in by_node.items():
        ids.sort()
        start[ids[0]] = INITIAL1
        for aid in ids[1:]:
            start[aid] = BACKUP_WAIT
    return start


class ScatPebbleProtocol(Protocol):
    name = "pbl-scat"
    sync_machine = FORWARD
    mutations = ()

    def __init__(self, config: RingConfig, mutation: Optional[str] = None):
        super().__init__(config, mutation)
        self._coloc = ColocPebbleProtocol(config)
        self._starts = multiplicity_dispatch(config.placement)
        # ids that share the agent's start node: expected company at home,
        # so only genuine strangers (the gather party) trigger state flips
        self._mates = {
            aid: frozenset(
                b for b, other in config.placement if other == node and b != aid
            )
            for aid, node in config.placement
        }

    @property
    def period(self) -> int:
        return 3 * self.n + 2

    @property
    def coverage_window(self) -> int:
        return 3 * self.n + 2

    @property
    def recovery_rounds(self) -> int:
        # a death can take a full extra patrol cycle to surface as a pebble
        # surplus, then the gather walk and the hand-off relay's first tour
        return 4 * self.period

    def initial_agent_state(self, agent_id: int):
        home = self.config.start_of(agent_id)
        start = self._starts[agent_id]
        if start == COLOC:
            return ColocState(COLOC_INITIAL, home=home)
        return ScatState(start, home=home, ct=-1 if start == BACKUP_WAIT else 0)

    def initial_node_pebbles(self) -> Dict[int, int]:
        counts: Dict[int, int] = {}
        for aid, node in self.config.placement:
            if self._starts[aid] != IDLE_FOREVER:
                counts[node] = counts.get(node, 0) + 1
        return counts

    def initial_carried(self, agent_id: int) -> int:
        # the parked fourth agent keeps its pebble in hand
        return 1 if self._starts[agent_id] == IDLE_FOREVER else 0

    def state_payload(self, state):
        if isinstance(state, ColocState):
            return self._coloc.state_payload(state)
        return ()

    def step(self, st, snap: Snapshot, me: int):
        if isinstance(st, ColocState):
            return self._coloc.step(st, snap, me)
        return self._scat_step(st, snap, me)

    def _scat_step(self, st: ScatState, snap: Snapshot, me: int):
        n = self.n
        m = st.machine

        if m == IDLE_FOREVER:
            return st, IDLE

        if m == INITIAL1:
            # declare home and start the first segment walk in the same round
            st = ScatState(FORWARD, home=snap.pos, size=0, s=0, ct=0)
            return st, MOVE_CW

        if m == COLOC:
            return ColocState(COLOC_INITIAL, home=snap.pos), IDLE

        ct = st.ct + 1
        st = st._replace(ct=ct)
        peb = snap.store.pebbles
        agents_here = len(snap.co_located)

        if m == FORWARD:
            if st.s == 0:
                if snap.pos != st.home and peb > 0:
                    return st._replace(machine=WAIT1, size=ct, s=1), IDLE
                return st, MOVE_CW
            if ct < st.size:
                return st, MOVE_CW
            return st._replace(machine=WAIT1), IDLE

        if m == WAIT1:
            if ct < n:
                return st, IDLE
            return st._replace(machine=FETCH), IDLE

        if m == FETCH:
            if snap.pos != st.home:
                act = Action(
                    pick=1 if (ct == n + 1 and peb > 0) else 0,
                    move=Direction.CCW,
                    drop_after_all=(snap.pos - 1) % n == st.home,
                )
                return st, act
            if peb > agents_here:
                return st._replace(machine=GATHER1), IDLE
            return st._replace(machine=WAIT2), IDLE

        if m == WAIT2:
            strangers = snap.co_located - self._mates[me] - {me}
            if agents_here >= 3:
                return st._replace(machine=COLOC), Action(drop_all=True)
            if strangers:
                return st._replace(machine=GATHER2), SWEEP_CW
            if ct <= 3 * n:
                return st, IDLE
            return st._replace(machine=FORWARD, ct=-1), IDLE

        if m == GATHER1:
            if ct <= 2 * n + 1:
                return st, IDLE
            if agents_here >= 3:
                return st._replace(machine=COLOC), Action(drop_all=True)
            return st, SWEEP_CW

        if m == GATHER2:
            if agents_here >= 3:
                return st._replace(machine=COLOC), Action(drop_all=True)
            return st, SWEEP_CW

        if m == BACKUP_WAIT:
            if agents_here >= 3:
                return st._replace(machine=COLOC), Action(drop_all=True)
            if ct < 2 * n + 2:
                return st, IDLE
            if peb > agents_here:
                return st._replace(machine=GATHER2), SWEEP_CW
            return st._replace(machine=BACKUP), IDLE

        if m == BACKUP:
            if agents_here >= 3:
                return st._replace(machine=COLOC), Action(drop_all=True)
            if ct <= 3 * n:
                return st, IDLE
            return st._replace(machine=BACKUP_WAIT, ct=-1), IDLE

        raise ProtocolIntegrityError(f"scat-pbl: unknown machine {m!r}")
