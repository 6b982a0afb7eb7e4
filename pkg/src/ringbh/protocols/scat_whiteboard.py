"""Three scattered agents with node whiteboards: visited-message auditing,
direction-marked segments, and a two-agent cautious walk.

Each agent cycles through its own segment with period 4n+1 (it counted from
the Initial round):
    0           clear the home whiteboard, write (home, id), set off clockwise
    1..n-1      Forward: mark each interior node "right", stop at the next
                home message (the segment end)
    n           audit the segment end: a leftover "visited" message means its
                owner died backtracking; otherwise write (visited, id)
    n+1..2n-1   Back-Wait at the segment end, watching for a gather summons
    2n..3n-1    Backtrack: re-mark the segment "left" back to home
    3n          audit home: a missing "visited" message means the clockwise
                neighbour died on its way here
    3n+1..4n-1  Initial-Wait at home, watching for a gather summons
    4n          start over

An auditor that saw an anomaly (Gather) walks toward the other survivor,
leaves a direction report on the whiteboard where they meet, and the two
walk together (Gather1 clockwise / Gather2 counter-clockwise) to the dead
agent's home or its segment end: the cautious start node.  From there the
lower id probes one node ahead (Cautious-Leader) and only fetches its
partner (Cautious-Follower) onto nodes still carrying the dead agent's
direction marking.  The first node without it is the black hole; if the
probe never comes back, the follower knows the same thing.

With the three agents on two start nodes, the singleton marches clockwise
marking nodes while the pair sits tight: either the trio meets and runs the
co-located relay on mark bits, or the pair walks to the singleton's home and
cautious-walks its trail.
"""

from __future__ import annotations

from typing import Dict, NamedTuple, Optional, Tuple

from ..engine import Action, IDLE, ProtocolIntegrityError, Snapshot
from ..ring import (
    Direction,
    MARK_LEFT,
    MARK_RIGHT,
    RingConfig,
    WB_CLEAR_ALL,
    WB_SET_DIR,
    WB_SET_HOME,
    WB_SET_MARKING,
    WB_SET_VISITED,
)
from .base import Protocol, explore_move
from .coloc_pebble import ColocPebbleProtocol, ColocState, INITIAL as COLOC_INITIAL

INITIAL = "Initial"
FORWARD = "Forward"
BACK_WAIT = "Back-Wait"
BACKTRACK = "Backtrack"
INITIAL_WAIT = "Initial-Wait"
GATHER = "Gather"
GATHER1 = "Gather1"
GATHER2 = "Gather2"
C_LEADER = "Cautious-Leader"
C_FOLLOWER = "Cautious-Follower"
EXPLORE = "ExploreForever"
PAIR_WAIT = "Pair-Wait"
SOLO_MARCH = "Solo-March"
PAIR_MARCH = "Pair-March"

MOVE_CW = Action(move=Direction.CW)
MOVE_CCW = Action(move=Direction.CCW)


class WBState(NamedTuple):
    machine: str
    home: int
    it: int = 0  # rounds since this cycle's Initial round
    sdir: int = 0  # stored direction report: +1 cw, -1 ccw, 0 none
    sid: Optional[int] = None  # id component of the stored report
    move: int = 0
    wait: int = 0
    marking: str = ""
    avoid: int = -1
    xdir: int = 1


def multiplicity_dispatch_wb(placement) -> Dict[int, str]:
    """Start machine per agent: the full protocol on three distinct nodes;
    with two start nodes the pair waits while the singleton marches."""
    by_node: Dict[int, list] = {}
    for aid, node in placement:
        by_node.setdefault(node, []).append(aid)
    if len(by_node) >= 3:
        return {aid: INITIAL for aid, _ in placement}
    starts: Dict[int, str] = {}
    for node, ids in by_node.items():
        kind = PAIR_WAIT if len(ids) == 2 else SOLO_MARCH
        for aid in ids:
            starts[aid] = kind
    return starts


class ScatWhiteboardProtocol(Protocol):
    name = "wb-scat"
    sync_machine = INITIAL
    mutations = ("drop-visited",)

    def __init__(self, config: RingConfig, mutation: Optional[str] = None):
        super().__init__(config, mutation)
        self._coloc = ColocPebbleProtocol(config)
        self._starts = multiplicity_dispatch_wb(config.placement)
        self._pair_ids = frozenset(
            aid for aid, kind in self._starts.items() if kind == PAIR_WAIT
        )

    @property
    def period(self) -> int:
        return 4 * self.n + 1

    @property
    def recovery_rounds(self) -> int:
        # detection lands within 10n of a death; allow that plus the first
        # exploration sweep before demanding steady coverage
        return 3 * self.period

    def initial_agent_state(self, agent_id: int):
        home = self.config.start_of(agent_id)
        return WBState(self._starts[agent_id], home=home)

    def initial_carried(self, agent_id: int) -> int:
        # multiplicity starts carry one simulated pebble for the relay
        return 0 if self._starts[agent_id] == INITIAL else 1

    def state_payload(self, state):
        if isinstance(state, ColocState):
            return self._coloc.state_payload(state)
        return ()

    def step(self, st, snap: Snapshot, me: int):
        if isinstance(st, ColocState):
            return self._coloc.step(st, snap, me)
        return self._wb_step(st, snap, me)

    def _wb_step(self, st: WBState, snap: Snapshot, me: int):
        n = self.n
        m = st.machine
        store = snap.store
        company = len(snap.co_located) > 1

        if m == EXPLORE:
            xdir, move = explore_move(snap.pos, st.avoid, st.xdir, n)
            return st._replace(xdir=xdir), Action(move=move)

        if m == INITIAL:
            st = WBState(FORWARD, home=snap.pos, it=0)
            return st, Action(
                move=Direction.CW, wb=((WB_CLEAR_ALL,), (WB_SET_HOME, me))
            )

        if m in (PAIR_WAIT, SOLO_MARCH, PAIR_MARCH):
            return self._multiplicity_step(st, snap, me)

        it = st.it + 1
        st = st._replace(it=it)

        if m == FORWARD:
            if it < n:
                if store.home_id is None:
                    return st, Action(move=Direction.CW, wb=((WB_SET_MARKING, MARK_RIGHT),))
                return st, IDLE
            if store.visited_id is not None:
                return st._replace(machine=GATHER, sdir=-1, sid=None), IDLE
            if self.mutation == "drop-visited":
                return st._replace(machine=BACK_WAIT), IDLE
            return st._replace(machine=BACK_WAIT), Action(wb=((WB_SET_VISITED, me),))

        if m == BACK_WAIT:
            if it < 2 * n:
                msg = store.dir_msg
                if company and msg is not None and msg.direction is Direction.CCW:
                    nxt = st._replace(machine=GATHER2, sdir=-1, sid=msg.agent_id)
                    return nxt, MOVE_CCW
                return st, IDLE
            return st._replace(machine=BACKTRACK), MOVE_CCW

        if m == BACKTRACK:
            if it < 3 * n:
                if store.home_id is None:
                    return st, Action(move=Direction.CCW, wb=((WB_SET_MARKING, MARK_LEFT),))
                return st, IDLE
            if store.visited_id is not None:
                return st._replace(machine=INITIAL_WAIT), IDLE
            return st._replace(machine=GATHER, sdir=1, sid=None), IDLE

        if m == INITIAL_WAIT:
            if it < 4 * n:
                msg = store.dir_msg
                if company and msg is not None and msg.direction is Direction.CW:
                    nxt = st._replace(machine=GATHER1, sdir=1, sid=msg.agent_id)
                    return nxt, MOVE_CW
                return st, IDLE
            return st._replace(machine=INITIAL), IDLE

        if m == GATHER:
            if st.sdir > 0:
                if not company:
                    return st, MOVE_CW
                return (
                    st._replace(machine=GATHER1),
                    Action(wb=((WB_SET_DIR, Direction.CW, None),)),
                )
            if not company:
                return st, MOVE_CCW
            other = min(snap.co_located - {me})
            return (
                st._replace(machine=GATHER2, sid=other),
                Action(wb=((WB_SET_DIR, Direction.CCW, other),)),
            )

        if m == GATHER1:
            if store.home_id is not None and store.home_id not in snap.co_located:
                return self._split_cautious(st, snap, me)
            return st, MOVE_CW

        if m == GATHER2:
            if store.home_id is not None and store.home_id == st.sid:
                return self._split_cautious(st, snap, me)
            return st, MOVE_CCW

        if m == C_LEADER:
            if company:
                return st._replace(move=1), Action(move=Direction(st.sdir))
            if store.marking == st.marking:
                return st._replace(move=0), Action(move=Direction(-st.sdir))
            nxt = st._replace(machine=EXPLORE, avoid=snap.pos, xdir=st.sdir)
            return nxt, Action(claim=snap.pos)

        if m == C_FOLLOWER:
            if st.move == 0:
                return st._replace(move=1, wait=0), IDLE
            if st.wait < 1:
                return st._replace(wait=1), IDLE
            if company:
                return st._replace(move=0), Action(move=Direction(st.sdir))
            target = (snap.pos + st.sdir) % n
            nxt = st._replace(machine=EXPLORE, avoid=target, xdir=st.sdir)
            return nxt, Action(claim=target)

        raise ProtocolIntegrityError(f"wb-scat: unknown machine {m!r}")

    def _split_cautious(self, st: WBState, snap: Snapshot, me: int):
        if me == min(snap.co_located):
            marking = MARK_RIGHT if st.sdir > 0 else MARK_LEFT
            return st._replace(machine=C_LEADER, move=0, marking=marking), IDLE
        return st._replace(machine=C_FOLLOWER, move=0, wait=0), IDLE

    def _multiplicity_step(self, st: WBState, snap: Snapshot, me: int):
        n = self.n
        m = st.machine
        trio = len(snap.co_located) >= 3

        if m == SOLO_MARCH:
            if trio:
                return ColocState(COLOC_INITIAL, home=snap.pos), Action(drop=1)
            wb = [(WB_SET_MARKING, MARK_RIGHT)]
            if st.move == 0:
                wb.insert(0, (WB_SET_HOME, me))
            return st._replace(move=1), Action(move=Direction.CW, wb=tuple(wb))

        it = st.it + 1
        st = st._replace(it=it)

        if m == PAIR_WAIT:
            if trio:
                return ColocState(COLOC_INITIAL, home=snap.pos), Action(drop=1)
            if it == 1:
                return st, Action(wb=((WB_SET_HOME, me),))
            if it <= n:
                return st, IDLE
            return st._replace(machine=PAIR_MARCH), MOVE_CW

        if m == PAIR_MARCH:
            if snap.store.home_id is not None and snap.store.home_id not in self._pair_ids:
                st = st._replace(sdir=1)
                return self._split_cautious(st, snap, me)
            return st, MOVE_CW

        raise ProtocolIntegrityError(f"wb-scat: unknown machine {m!r}")
