"""Three co-located agents with one pebble each: leader/follower pebble relay.

One iteration is 4n+1 rounds.  The leader carries a pebble clockwise around
the ring, advancing one node every 4 rounds once the relay is rolling; the
follower shuttles a second pebble behind it (drop ahead, step back, fetch,
catch up); the third agent holds the fort at home with the last pebble.
Each anomaly an agent can observe pins the black hole down:

  - the follower finds the leader gone at the catch-up node: that node is
    the black hole;
  - the follower's dropped pebble vanishes: the node it dropped it on is;
  - the leader times out waiting for the follower: the follower died one or
    two nodes behind, so the leader leaves its pebble as a boundary marker
    and reports home; the survivors narrow the region to two candidates and
    patrol them (Detection) until the black hole eats one more probe;
  - nobody returns home: the backup walks to the follower's orphaned pebble;
    the black hole is the next node clockwise.

Iteration timeline (rounds within an iteration, split round = 0): the leader
first moves at round 1 and reaches node v at round 4v-4 (v >= 2); the relay
meets at node v at round 4v-1; the leader re-enters home at 4n-4, the
follower at 4n-1 with the last pebble, and everyone re-splits at 4n+1.

The same machine runs under the whiteboard model with pebbles simulated by
mark bits in node memory (see as_whiteboard_variant).
"""

from __future__ import annotations

from typing import Dict, NamedTuple, Optional, Tuple

from ..engine import Action, IDLE, ProtocolIntegrityError, Snapshot
from ..ring import CommModel, Direction, RingConfig
from .base import Protocol, explore_move

INITIAL = "Initial"
LEADER = "Leader"
F_FIND = "Follower-Find"
F_COLLECT = "Follower-Collect"
BACKUP = "Backup"
REPORT = "Report-Leader"
FIND_PEBBLE = "Find-Pebble"
FIND_BH = "Find-BH"
DETECTION = "Detection"
EXPLORE = "ExploreForever"

MOVE_CW = Action(move=Direction.CW)
MOVE_CCW = Action(move=Direction.CCW)


def as_whiteboard_variant(action: Action) -> Action:
    """Rewrite of pebble traffic for the whiteboard model.

    A pebble on a node is simulated by a mark bit in the node's memory:
    dropping writes marks, picking erases them, and carrying is the agent's
    own memory between an erase and a write.  The action shape is identical;
    the engine lands pick/drop on the whiteboard mark slots instead of the
    pebble count, so the machine behaves exactly as under pebbles.
    """
    return action


class ColocState(NamedTuple):
    machine: str
    home: int
    it: int = 0  # rounds since this iteration's Initial round
    P: int = 3  # pebbles at home when the iteration started
    lo: int = 0
    mid: int = 0
    hi: int = 0
    move: int = 0  # follower phase flag / find-pebble first-move flag
    w: int = 0  # leader's wait-for-follower budget
    fc: int = 0  # follower-collect sub-step
    dt: int = 0  # detection cycle counter
    pmin: int = 0  # backup: least home pebble count seen this iteration
    avoid: int = -1
    xdir: int = 1


class ColocPebbleProtocol(Protocol):
    name = "pbl-coloc"
    sync_machine = INITIAL
    mutations = ()

    @property
    def period(self) -> int:
        return 4 * self.n + 1

    def initial_agent_state(self, agent_id: int) -> ColocState:
        return ColocState(INITIAL, home=self.config.start_of(agent_id))

    def initial_node_pebbles(self) -> Dict[int, int]:
        counts: Dict[int, int] = {}
        for _, node in self.config.placement:
            counts[node] = counts.get(node, 0) + 1
        return counts

    def _peb(self, snap: Snapshot) -> int:
        if self.config.comm_model is CommModel.PEBBLE:
            return snap.store.pebbles
        return snap.store.pebble_marks

    def step(self, st: ColocState, snap: Snapshot, me: int) -> Tuple[ColocState, Action]:
        n = self.n
        m = st.machine

        if m == EXPLORE:
            xdir, move = explore_move(snap.pos, st.avoid, st.xdir, n)
            return st._replace(xdir=xdir), Action(move=move)

        if m == INITIAL:
            co = sorted(snap.co_located)
            if len(co) != 3:
                raise ProtocolIntegrityError(
                    f"coloc relay needs exactly 3 agents at the start node,"
                    f" saw {len(co)}"
                )
            peb = self._peb(snap)
            st = ColocState(
                INITIAL,
                home=snap.pos,
                it=0,
                P=peb,
                lo=co[0],
                mid=co[1],
                hi=co[2],
                pmin=peb,
            )
            if me == co[0]:
                return st._replace(machine=LEADER), IDLE
            if me == co[1]:
                return st._replace(machine=F_FIND, move=0), IDLE
            return st._replace(machine=BACKUP), IDLE

        it = st.it + 1
        st = st._replace(it=it)
        close = 4 * n

        if m == LEADER:
            return self._leader(st, snap, me, close)
        if m == F_FIND:
            return self._follower_find(st, snap, me, close)
        if m == F_COLLECT:
            if st.fc == 0:
                return st._replace(fc=1), MOVE_CCW
            if self._peb(snap) > 0:
                nxt = st._replace(machine=F_FIND, move=0, fc=0)
                return nxt, Action(pick=1, move=Direction.CW, drop_after=1)
            nxt = st._replace(machine=EXPLORE, avoid=snap.pos, xdir=1)
            return nxt, Action(claim=snap.pos)
        if m == BACKUP:
            return self._backup(st, snap, me, close)
        if m == REPORT:
            if st.hi not in snap.co_located:
                return st, MOVE_CW
            if it < close:
                return st, IDLE
            return st._replace(machine=FIND_PEBBLE, move=1), IDLE
        if m == FIND_PEBBLE:
            if st.move == 1:
                return st._replace(move=0), MOVE_CCW
            if self._peb(snap) > 0:
                return st._replace(machine=DETECTION, home=snap.pos, dt=0), IDLE
            return st, MOVE_CCW
        if m == FIND_BH:
            if self._peb(snap) > 0:
                target = (snap.pos + 1) % n
                nxt = st._replace(machine=EXPLORE, avoid=target, xdir=1)
                return nxt, Action(claim=target)
            return st, MOVE_CW
        if m == DETECTION:
            return self._detection(st, snap, me)

        raise ProtocolIntegrityError(f"coloc: unknown machine {m!r}")

    def _leader(self, st: ColocState, snap: Snapshot, me: int, close: int):
        n = self.n
        with_follower = st.mid in snap.co_located
        if snap.pos == st.home:
            good = with_follower and self._peb(snap) == st.P
            if st.it == 1 and good:
                return st._replace(w=0), Action(pick=1, move=Direction.CW)
            if st.it < close:
                return st, IDLE
            if good:
                return st._replace(machine=INITIAL), IDLE
            # the relay never came home whole: the follower was lost on the
            # final stretch, two candidate nodes remain
            return st._replace(machine=DETECTION, dt=0), IDLE
        if with_follower:
            if (snap.pos + 1) % n == st.home:
                return st._replace(w=0), Action(move=Direction.CW, drop_after_all=True)
            return st._replace(w=0), MOVE_CW
        if st.w < 3:
            return st._replace(w=st.w + 1), IDLE
        # follower overdue: leave the carried pebble as a region marker and
        # report back to the backup agent
        return st._replace(machine=REPORT), Action(drop_all=True, move=Direction.CW)

    def _follower_find(self, st: ColocState, snap: Snapshot, me: int, close: int):
        n = self.n
        with_leader = st.lo in snap.co_located
        if not with_leader:
            if st.move == 0:
                nxt_node = (snap.pos + 1) % n
                if nxt_node == st.home:
                    # last hop: bring the relay pebble home
                    act = Action(pick=1, move=Direction.CW, drop_after=1)
                else:
                    act = MOVE_CW
                return st._replace(move=1), act
            nxt = st._replace(machine=EXPLORE, avoid=snap.pos, xdir=1)
            return nxt, Action(claim=snap.pos)
        if st.move == 0:
            return st, IDLE  # leader has not set off yet
        if snap.pos == st.home:
            if st.it < close:
                return st, IDLE
            return st._replace(machine=INITIAL), IDLE
        return st._replace(machine=F_COLLECT, fc=0), IDLE

    def _backup(self, st: ColocState, snap: Snapshot, me: int, close: int):
        n = self.n
        cnt = self._peb(snap)
        if cnt < st.pmin:
            st = st._replace(pmin=cnt)
        if st.it < close:
            return st, IDLE
        lo_in = st.lo in snap.co_located
        mid_in = st.mid in snap.co_located
        if lo_in and mid_in and cnt == st.P:
            return st._replace(machine=INITIAL), IDLE
        if lo_in and cnt == st.P - 2:
            return st._replace(machine=FIND_PEBBLE, move=1), IDLE
        if lo_in and cnt == st.P - 1:
            if st.pmin <= st.P - 2:
                # the relay ran and the follower was lost on the final
                # stretch: the two candidates are next door counter-clockwise
                return st._replace(machine=DETECTION, dt=0), IDLE
            # the follower died before ever shuttling its pebble out, so the
            # leader noticed and left its marker: go find it
            return st._replace(machine=FIND_PEBBLE, move=1), IDLE
        if not lo_in:
            if cnt >= st.P - 1:
                # the follower never shuttled a pebble out: it and the leader
                # died next door
                target = (st.home + 1) % n
                nxt = st._replace(machine=EXPLORE, avoid=target, xdir=1)
                return nxt, Action(claim=target)
            return st._replace(machine=FIND_BH), MOVE_CW
        raise ProtocolIntegrityError(
            f"backup saw an impossible end-of-iteration shape:"
            f" lo={lo_in} mid={mid_in} pebbles={cnt} of {st.P}"
        )

    def _detection(self, st: ColocState, snap: Snapshot, me: int):
        n = self.n
        lowest = me == st.lo
        dt = st.dt + 1
        st = st._replace(dt=dt)
        cycle_end = 2 * n - 3
        if lowest:
            if dt <= n - 2:
                return st, MOVE_CW
            if dt <= 2 * n - 4:
                return st, MOVE_CCW
        else:
            if dt == 1:
                return st, MOVE_CCW
            if dt == 2:
                return st, MOVE_CW
            if dt < cycle_end:
                return st, IDLE
        if dt < cycle_end:
            return st, IDLE
        partner = st.hi if lowest else st.lo
        if partner in snap.co_located:
            return st._replace(dt=0), IDLE
        dist = (n - 1) if lowest else (n - 2)
        target = (st.home + dist) % n
        nxt = st._replace(machine=EXPLORE, avoid=target, xdir=1)
        return nxt, Action(claim=target)
