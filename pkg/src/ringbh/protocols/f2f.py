"""Face-to-face protocol for co-located agents: binary shrinkage of the
suspicious region.

Every iteration takes exactly 2n+4 rounds and all survivors re-enter
Initial1 at home simultaneously.  The suspicious region is the clockwise
arc [s_lft, s_rgt] of distances from home.  Each iteration two walkers probe
it from both ends up to the middle node; a walker that fails to return
certifies that its half contains the black hole, halving the region at the
cost of one agent.  With both walkers lost, the middle node itself is the
black hole.  When the region is down to two nodes and two agents, the pair
patrols one node each (Detection) until one of them disappears.

Iteration timeline for a walker sent out to distance D (rounds within the
iteration, dispatch round = 0):
    1..D        outbound, one hop per round
    D+1..n-1    wait at the destination
    n..n+D-1    backtrack
    n+D..2n+2   wait at home
    2n+3        check survivors, adopt the new region, re-enter Initial1
Stagnant agents idle at home through round 2n+2 and check at 2n+3.
"""

from __future__ import annotations

import math
from typing import NamedTuple, Optional, Tuple

from ..engine import Action, IDLE, ProtocolIntegrityError, Snapshot
from ..ring import Direction, RingConfig
from .base import Protocol, explore_move

INITIAL0 = "Initial0"
INITIAL1 = "Initial1"
FWD_L = "Forward-Left"
FWD_R = "Forward-Right"
WAIT_L = "Wait-Left"
WAIT_R = "Wait-Right"
BACK_L = "Backtrack-Left"
BACK_R = "Backtrack-Right"
WAIT1_L = "Wait1-Left"
WAIT1_R = "Wait1-Right"
STAGNANT = "Stagnant"
DETECTION = "Detection"
EXPLORE = "ExploreForever"

MOVE_CW = Action(move=Direction.CW)
MOVE_CCW = Action(move=Direction.CCW)


def required_agents(n: int) -> int:
    """Agents sufficient for ring size n: ceil(log2(n-1)) + 3."""
    if n < 4:
        raise ValueError("n must be at least 4")
    return math.ceil(math.log2(n - 1)) + 3


def dest_of(s_lft: int, s_rgt: int) -> int:
    """Clockwise distance from home of the middle node of [s_lft, s_rgt]."""
    if s_lft > s_rgt:
        raise ValueError("empty suspicious region")
    size = s_rgt - s_lft + 1
    return s_lft + (size + 1) // 2 - 1


class F2FState(NamedTuple):
    machine: str
    home: int
    s_lft: int
    s_rgt: int
    it: int = 0  # rounds since this iteration's Initial1 round
    k: int = 0  # live-agent count observed at dispatch
    dest: int = 0  # walker target distance; one-way distance in Detection
    low: int = 0  # lowest id at dispatch (SEQ1 walker)
    snd: int = 0  # second-lowest id at dispatch (SEQ2 walker)
    avoid: int = -1
    xdir: int = 1


class F2FProtocol(Protocol):
    name = "f2f"
    sync_machine = INITIAL1
    mutations = ("skip-wait1",)

    @property
    def period(self) -> int:
        return 2 * self.n + 4

    @property
    def recovery_rounds(self) -> int:
        # iterations keep covering the ring through anomalies; one period
        # absorbs any partial iteration around a death
        return self.period

    def initial_agent_state(self, agent_id: int) -> F2FState:
        home = self.config.start_of(agent_id)
        return F2FState(INITIAL1, home=home, s_lft=1, s_rgt=self.n - 1)

    def state_payload(self, state: F2FState):
        return (("s_lft", str(state.s_lft)), ("s_rgt", str(state.s_rgt)))

    def step(self, st: F2FState, snap: Snapshot, me: int) -> Tuple[F2FState, Action]:
        n = self.n
        m = st.machine

        if m == INITIAL0:
            return (
                F2FState(INITIAL1, home=snap.pos, s_lft=1, s_rgt=n - 1),
                IDLE,
            )

        if m == EXPLORE:
            xdir, move = explore_move(snap.pos, st.avoid, st.xdir, n)
            return st._replace(xdir=xdir), Action(move=move)

        if m == INITIAL1:
            return self._dispatch(st, snap, me)

        it = st.it + 1
        st = st._replace(it=it)

        if m == FWD_L:
            nxt = st if it < st.dest else st._replace(machine=WAIT_L)
            return nxt, MOVE_CW
        if m == FWD_R:
            d2 = n - st.dest
            nxt = st if it < d2 else st._replace(machine=WAIT_R)
            return nxt, MOVE_CCW
        if m == WAIT_L:
            if it < n:
                return st, IDLE
            machine = WAIT1_L if st.dest == 1 else BACK_L
            return st._replace(machine=machine), MOVE_CCW
        if m == WAIT_R:
            if it < n:
                return st, IDLE
            machine = WAIT1_R if n - st.dest == 1 else BACK_R
            return st._replace(machine=machine), MOVE_CW
        if m == BACK_L:
            nxt = st if it < n + st.dest - 1 else st._replace(machine=WAIT1_L)
            return nxt, MOVE_CCW
        if m == BACK_R:
            nxt = st if it < n + (n - st.dest) - 1 else st._replace(machine=WAIT1_R)
            return nxt, MOVE_CW

        check_round = 2 * n + 3
        if m == WAIT1_L:
            gate = check_round - 1 if self.mutation == "skip-wait1" else check_round
            if it < gate:
                return st, IDLE
            if st.snd not in snap.co_located:
                st = st._replace(s_lft=st.dest)
            return st._replace(machine=INITIAL1), IDLE
        if m == WAIT1_R:
            if it < check_round:
                return st, IDLE
            if st.low not in snap.co_located:
                st = st._replace(s_rgt=st.dest)
            return st._replace(machine=INITIAL1), IDLE
        if m == STAGNANT:
            if it < check_round:
                return st, IDLE
            low_back = st.low in snap.co_located
            snd_back = st.snd in snap.co_located
            if not low_back and not snd_back:
                target = (st.home + st.dest) % n
                nxt = st._replace(machine=EXPLORE, avoid=target, xdir=1)
                return nxt, Action(claim=target)
            if not low_back:
                st = st._replace(s_rgt=st.dest)
            elif not snd_back:
                st = st._replace(s_lft=st.dest)
            return st._replace(machine=INITIAL1), IDLE
        if m == DETECTION:
            lowest = me == st.low
            d0 = st.dest
            out = Direction.CW if lowest else Direction.CCW
            if it <= d0:
                return st, Action(move=out)
            if it <= 2 * d0:
                return st, Action(move=Direction(-int(out)))
            if it < check_round:
                return st, IDLE
            partner = st.snd if lowest else st.low
            if partner in snap.co_located:
                return st._replace(machine=INITIAL1), IDLE
            dist = st.s_rgt if lowest else st.s_lft
            target = (st.home + dist) % n
            nxt = st._replace(machine=EXPLORE, avoid=target, xdir=1)
            return nxt, Action(claim=target)

        raise ProtocolIntegrityError(f"f2f: unknown machine {m!r}")

    def _dispatch(self, st: F2FState, snap: Snapshot, me: int):
        n = self.n
        st = st._replace(it=0)
        if st.s_lft == st.s_rgt:
            target = (st.home + st.s_lft) % n
            nxt = st._replace(machine=EXPLORE, avoid=target, xdir=1)
            return nxt, Action(claim=target)
        co = sorted(snap.co_located)
        k = len(co)
        if k <= 1:
            raise ProtocolIntegrityError(
                f"f2f: agent {me} dispatched alone with region"
                f" [{st.s_lft}, {st.s_rgt}]"
            )
        size = st.s_rgt - st.s_lft + 1
        if size == 2 and k == 2:
            d0 = st.s_lft if me == co[0] else n - st.s_rgt
            nxt = st._replace(
                machine=DETECTION, k=k, dest=d0, low=co[0], snd=co[1]
            )
            return nxt, IDLE
        dest = dest_of(st.s_lft, st.s_rgt)
        st = st._replace(k=k, dest=dest, low=co[0], snd=co[1])
        if me == co[0]:
            return st._replace(machine=FWD_L), IDLE
        if me == co[1]:
            return st._replace(machine=FWD_R), IDLE
        return st._replace(machine=STAGNANT), IDLE
