"""Synchronous round engine: snapshot, compute, communicate, move.

Round semantics:
  1. the adversary fixes this round's decision before any agent acts;
  2. if the black hole is active, agents already sitting on it are destroyed
     before their compute step (they take no action this round);
  3. every surviving agent computes from a snapshot of the round-start state;
  4. store writes (whiteboard ops, pebble picks/drops) apply in ascending
     agent-id order, after all reads, so no agent observes a same-round write;
  5. moves apply simultaneously; agents crossing the same edge in opposite
     directions do not interact;
  6. if active, agents that moved onto the black hole are destroyed at the
     end of the move step (anything they carried is destroyed with them);
  7. if the destroy-data flag is set, everything stored at the black hole
     node at the end of the round is erased;
  8. the round counter increments.

Detection claims are recorded, never enforced; the verifier judges them.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Callable, List, NamedTuple, Optional, Tuple

from .ring import CommModel, Direction, NodeStore, RingConfig, write_message
from .trace import (
    KIND_BH_ACTIVE,
    KIND_DESTROYED,
    KIND_DETECT_CLAIM,
    KIND_MOVE,
    KIND_PEBBLE_DROP,
    KIND_PEBBLE_PICK,
    KIND_STATE_CHANGE,
    KIND_WB_ERASE,
    KIND_WB_WRITE,
    TraceEvent,
)


class ProtocolIntegrityError(RuntimeError):
    """The protocol machine did something structurally impossible
    (picked a pebble from an empty node, malformed action, broken dispatch).
    These indicate a model bug, not an adversary outcome."""


class AgentRecord(NamedTuple):
    id: int
    pos: Optional[int]  # None once destroyed
    alive: bool
    state: object  # protocol-specific machine state, hashable
    carried: int  # pebbles in hand; destroyed with the agent

    @property
    def machine(self) -> str:
        return self.state.machine  # type: ignore[attr-defined]


class GlobalState(NamedTuple):
    round: int
    agents: Tuple[AgentRecord, ...]
    nodes: Tuple[NodeStore, ...]
    claims: Tuple[Tuple[int, int, int], ...]  # (agent_id, claimed_node, round)
    destroyed_pebbles: int

    @property
    def destroyed_agents(self) -> frozenset:
        return frozenset(a.id for a in self.agents if not a.alive)

    def live_agents(self) -> Tuple[AgentRecord, ...]:
        return tuple(a for a in self.agents if a.alive)

    def pebbles_in_system(self) -> int:
        on_nodes = sum(s.pebbles + s.pebble_marks for s in self.nodes)
        carried = sum(a.carried for a in self.agents if a.alive)
        return on_nodes + carried + self.destroyed_pebbles


class Snapshot(NamedTuple):
    """What one agent perceives at the start of a round: its node's store
    and the ids of co-located agents (its own id included)."""

    pos: int
    store: NodeStore
    co_located: frozenset


class Action(NamedTuple):
    """One agent's output for a round.  Picks/drops act on the current node
    before moving; drop_after deposits on the landing node after the move.
    The *_all variants resolve against what is actually present/carried when
    the action applies, so co-located agents contend deterministically."""

    move: Optional[Direction] = None
    pick: int = 0
    pick_all: bool = False
    drop: int = 0
    drop_all: bool = False
    drop_after: int = 0
    drop_after_all: bool = False
    wb: Tuple[Tuple, ...] = ()
    claim: Optional[int] = None


IDLE = Action()


class AdversaryDecision(NamedTuple):
    active: bool
    destroy_data: bool

    @staticmethod
    def make(active: bool, destroy_data: bool) -> "AdversaryDecision":
        if destroy_data and not active:
            raise ValueError("destroy_data requires the black hole to be active")
        return AdversaryDecision(active, destroy_data)


INACTIVE = AdversaryDecision(False, False)


class AdversaryView(NamedTuple):
    """What a decision may condition on, beyond full omniscient state access:
    the black hole's residents, this round's would-be entrants, and the data
    stored at the black hole."""

    round: int
    agents_at_bh: frozenset
    agents_entering_bh: frozenset
    data_at_bh: NodeStore


@dataclass(frozen=True)
class EngineOptions:
    # Whether an agent merely sitting on the black hole during an active
    # round is destroyed (arrivals always are).  Sensitivity switch.
    kill_resident: bool = True


DEFAULT_OPTIONS = EngineOptions()


class StepOutcome(NamedTuple):
    state: GlobalState
    events: Tuple[TraceEvent, ...]


def initial_state(config: RingConfig, protocol) -> GlobalState:
    """Build round-0 state: agents in their start machines, initial pebbles
    (or pebble marks) placed on the start nodes."""
    nodes = [NodeStore() for _ in range(config.n)]
    for node, count in protocol.initial_node_pebbles().items():
        if config.comm_model is CommModel.PEBBLE:
            nodes[node] = nodes[node]._replace(pebbles=count)
        elif config.comm_model is CommModel.WHITEBOARD:
            nodes[node] = nodes[node]._replace(pebble_marks=count)
        else:
            raise ProtocolIntegrityError("pebbles are not available under f2f")
    agents = tuple(
        AgentRecord(
            id=aid,
            pos=config.start_of(aid),
            alive=True,
            state=protocol.initial_agent_state(aid),
            carried=protocol.initial_carried(aid),
        )
        for aid in config.agent_ids
    )
    return GlobalState(
        round=0,
        agents=agents,
        nodes=tuple(nodes),
        claims=(),
        destroyed_pebbles=0,
    )


def build_snapshots(state: GlobalState, config: RingConfig):
    """Round-start snapshot per live agent.  Under f2f the store view is
    empty by construction (the engine never lets f2f runs touch stores)."""
    at_node: dict = {}
    for a in state.agents:
        if a.alive:
            at_node.setdefault(a.pos, []).append(a.id)
    snaps = {}
    for a in state.agents:
        if not a.alive:
            continue
        snaps[a.id] = Snapshot(
            pos=a.pos,
            store=state.nodes[a.pos],
            co_located=frozenset(at_node[a.pos]),
        )
    return snaps


class PreparedRound(NamedTuple):
    steps: Tuple[Tuple[int, object, Action], ...]  # (agent_id, new_state, action)
    view: AdversaryView


def prepare_round(state: GlobalState, config: RingConfig, protocol) -> PreparedRound:
    """Run every live agent's compute step against round-start snapshots and
    package the adversary's view (which may depend on the chosen moves)."""
    snaps = build_snapshots(state, config)
    steps: List[Tuple[int, object, Action]] = []
    entering = set()
    residents = set()
    n = config.n
    for a in state.agents:
        if not a.alive:
            continue
        if a.pos == config.bh_index:
            residents.add(a.id)
        new_state, action = protocol.step(a.state, snaps[a.id], a.id)
        if action.move is not None:
            if (a.pos + int(action.move)) % n == config.bh_index:
                entering.add(a.id)
        steps.append((a.id, new_state, action))
    view = AdversaryView(
        round=state.round,
        agents_at_bh=frozenset(residents),
        agents_entering_bh=frozenset(entering),
        data_at_bh=state.nodes[config.bh_index],
    )
    return PreparedRound(tuple(steps), view)


def _validate_action(action: Action, comm: CommModel):
    if comm is CommModel.F2F:
        if (
            action.pick or action.pick_all or action.drop or action.drop_all
            or action.drop_after or action.drop_after_all or action.wb
        ):
            raise ProtocolIntegrityError("store actions are not allowed under f2f")
    elif comm is CommModel.PEBBLE:
        if action.wb:
            raise ProtocolIntegrityError("whiteboard writes are not allowed under pebble")


def _store_peb(store: NodeStore, comm: CommModel) -> int:
    return store.pebbles if comm is CommModel.PEBBLE else store.pebble_marks


def _store_with_peb(store: NodeStore, comm: CommModel, count: int) -> NodeStore:
    if comm is CommModel.PEBBLE:
        return store._replace(pebbles=count)
    return store._replace(pebble_marks=count)


def apply_round(
    state: GlobalState,
    config: RingConfig,
    prepared: PreparedRound,
    decision: AdversaryDecision,
    options: EngineOptions = DEFAULT_OPTIONS,
    protocol=None,
    emit_events: bool = True,
) -> StepOutcome:
    """Apply one round given the prepared computes and the adversary decision."""
    if decision.destroy_data and not decision.active:
        raise ValueError("destroy_data requires active")
    rnd = state.round
    bh = config.bh_index
    comm = config.comm_model
    n = config.n
    events: List[TraceEvent] = []

    def ev(kind, agent, node, *payload):
        if emit_events:
            events.append(TraceEvent(rnd, kind, agent, node, tuple(payload)))

    if decision.active:
        ev(KIND_BH_ACTIVE, None, bh, ("destroy_data", "1" if decision.destroy_data else "0"))

    agents = {a.id: a for a in state.agents}
    nodes = list(state.nodes)
    destroyed_pebbles = state.destroyed_pebbles
    new_claims: List[Tuple[int, int, int]] = []

    # Phase: resident kills (before compute takes effect).
    killed_pre = set()
    if decision.active and options.kill_resident:
        for aid in sorted(a.id for a in state.agents if a.alive and a.pos == bh):
            killed_pre.add(aid)
            rec = agents[aid]
            destroyed_pebbles += rec.carried
            agents[aid] = rec._replace(pos=None, alive=False, carried=0)
            ev(KIND_DESTROYED, aid, bh, ("cause", "resident"))

    live_steps = [
        (aid, nst, act) for aid, nst, act in prepared.steps if aid not in killed_pre
    ]

    # Phase: state changes (machine-name transitions) for agents that acted.
    if emit_events and protocol is not None:
        for aid, nst, act in live_steps:
            old = agents[aid].state
            if nst.machine != old.machine:
                payload = (("machine", nst.machine),) + protocol.state_payload(nst)
                ev(KIND_STATE_CHANGE, aid, agents[aid].pos, *payload)

    # Phase: store writes, picks and drops, serialized by ascending id.
    for aid, nst, act in live_steps:
        _validate_action(act, comm)
        rec = agents[aid]
        pos = rec.pos
        carried = rec.carried
        store = nodes[pos]
        put = rec.carried if act.drop_all else act.drop
        if put:
            if put > carried:
                raise ProtocolIntegrityError(
                    f"agent {aid} drops {put} pebbles but carries {carried}"
                )
            carried -= put
            store = _store_with_peb(store, comm, _store_peb(store, comm) + put)
            kind = KIND_PEBBLE_DROP if comm is CommModel.PEBBLE else KIND_WB_WRITE
            ev(kind, aid, pos, ("count", str(put)), ("what", "pebble"))
        take = act.pick
        if act.pick_all:
            take = _store_peb(store, comm)
        if take:
            have = _store_peb(store, comm)
            if take > have:
                raise ProtocolIntegrityError(
                    f"agent {aid} picks {take} pebbles from node {pos} holding {have}"
                )
            carried += take
            store = _store_with_peb(store, comm, have - take)
            kind = KIND_PEBBLE_PICK if comm is CommModel.PEBBLE else KIND_WB_ERASE
            ev(kind, aid, pos, ("count", str(take)), ("what", "pebble"))
        for op in act.wb:
            if comm is not CommModel.WHITEBOARD:
                raise ProtocolIntegrityError("whiteboard op outside whiteboard model")
            store = write_message(store, op)
            kind = KIND_WB_ERASE if op[0] == "clear_all" else KIND_WB_WRITE
            ev(kind, aid, pos, ("op", op[0]), ("value", ",".join(str(x) for x in op[1:])))
        nodes[pos] = store
        agents[aid] = rec._replace(carried=carried, state=nst)

    # Phase: simultaneous moves.
    movers: List[Tuple[int, int, Action]] = []
    for aid, nst, act in live_steps:
        if act.move is None:
            continue
        rec = agents[aid]
        dest = (rec.pos + int(act.move)) % n
        agents[aid] = rec._replace(pos=dest)
        movers.append((aid, dest, act))
        ev(KIND_MOVE, aid, dest, ("from", str(rec.pos)))

    # Phase: post-move deposits, then arrival kills.
    for aid, dest, act in movers:
        rec = agents[aid]
        put = rec.carried if act.drop_after_all else act.drop_after
        if put:
            if decision.active and dest == bh:
                continue  # the deposit dies with the agent below
            if put > rec.carried:
                raise ProtocolIntegrityError(
                    f"agent {aid} deposits {put} pebbles but carries {rec.carried}"
                )
            nodes[dest] = _store_with_peb(
                nodes[dest], comm, _store_peb(nodes[dest], comm) + put
            )
            agents[aid] = rec._replace(carried=rec.carried - put)
            kind = KIND_PEBBLE_DROP if comm is CommModel.PEBBLE else KIND_WB_WRITE
            ev(kind, aid, dest, ("count", str(put)), ("what", "pebble"))
    killed_post = set()
    if decision.active:
        for aid, dest, act in movers:
            if dest == bh:
                killed_post.add(aid)
                rec = agents[aid]
                destroyed_pebbles += rec.carried
                agents[aid] = rec._replace(pos=None, alive=False, carried=0)
                ev(KIND_DESTROYED, aid, bh, ("cause", "arrival"))

    # Phase: data destruction at the black hole.
    if decision.destroy_data:
        store = nodes[bh]
        gone_peb = store.pebbles + store.pebble_marks
        if gone_peb or not store.whiteboard_empty():
            destroyed_pebbles += gone_peb
            nodes[bh] = NodeStore()
            if gone_peb:
                ev(KIND_PEBBLE_PICK, None, bh, ("cause", "bh"), ("count", str(gone_peb)))
            if not store.whiteboard_empty():
                ev(KIND_WB_ERASE, None, bh, ("cause", "bh"), ("op", "clear_all"))

    # Phase: detection claims from agents that survived the round.
    for aid, nst, act in live_steps:
        if act.claim is not None and aid not in killed_post:
            new_claims.append((aid, act.claim, rnd))
            ev(KIND_DETECT_CLAIM, aid, act.claim)

    new_state = GlobalState(
        round=rnd + 1,
        agents=tuple(agents[a.id] for a in state.agents),
        nodes=tuple(nodes),
        claims=state.claims + tuple(new_claims),
        destroyed_pebbles=destroyed_pebbles,
    )
    return StepOutcome(new_state, tuple(events))


def run_round(
    state: GlobalState,
    config: RingConfig,
    protocol,
    adversary,
    options: EngineOptions = DEFAULT_OPTIONS,
    emit_events: bool = True,
) -> StepOutcome:
    prepared = prepare_round(state, config, protocol)
    decision = adversary.decide(prepared.view, state)
    return apply_round(
        state, config, prepared, decision, options, protocol, emit_events
    )


# Stop conditions for run_until.

def max_rounds(limit: int) -> Callable[[GlobalState, int], bool]:
    def stop(state: GlobalState, claims_seen: int) -> bool:
        return state.round >= limit
    stop.description = f"max_rounds({limit})"  # type: ignore[attr-defined]
    return stop


def first_detection(limit: int = 10**6) -> Callable[[GlobalState, int], bool]:
    def stop(state: GlobalState, claims_seen: int) -> bool:
        return claims_seen > 0 or state.round >= limit
    stop.description = f"first_detection(limit={limit})"  # type: ignore[attr-defined]
    return stop


def all_detected_or_max(limit: int) -> Callable[[GlobalState, int], bool]:
    def stop(state: GlobalState, claims_seen: int) -> bool:
        live = [a for a in state.agents if a.alive]
        claimed = {aid for aid, _, _ in state.claims}
        if live and all(a.id in claimed for a in live):
            return True
        return state.round >= limit
    stop.description = f"all_detected_or_max({limit})"  # type: ignore[attr-defined]
    return stop


def run_until(
    state: GlobalState,
    config: RingConfig,
    protocol,
    adversary,
    stop: Callable[[GlobalState, int], bool],
    options: EngineOptions = DEFAULT_OPTIONS,
) -> Tuple[GlobalState, List[TraceEvent]]:
    """Repeatedly apply run_round until the stop condition holds; returns the
    final state and the full ordered trace."""
    trace: List[TraceEvent] = []
    while not stop(state, len(state.claims)):
        state, events = run_round(state, config, protocol, adversary, options)
        trace.extend(events)
    return state, trace
