"""Line-oriented trace format: one event per line, diff-able, replayable.

Format:
    header n=<int> bh=<int> protocol=<name> comm=<name> placement=<i,j,...> adversary=<spec> seed=<int|->
    round=<int> kind=<KIND> agent=<int|-> node=<int|-> [k=v ...]

Fields are space-separated, keys lowercase, key order fixed per event.
Within a round, events are ordered by phase, then by agent id.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List, NamedTuple, Optional, Tuple

KIND_MOVE = "MOVE"
KIND_DESTROYED = "DESTROYED"
KIND_WB_WRITE = "WB_WRITE"
KIND_WB_ERASE = "WB_ERASE"
KIND_PEBBLE_DROP = "PEBBLE_DROP"
KIND_PEBBLE_PICK = "PEBBLE_PICK"
KIND_BH_ACTIVE = "BH_ACTIVE"
KIND_STATE_CHANGE = "STATE_CHANGE"
KIND_DETECT_CLAIM = "DETECT_CLAIM"

KINDS = (
    KIND_MOVE,
    KIND_DESTROYED,
    KIND_WB_WRITE,
    KIND_WB_ERASE,
    KIND_PEBBLE_DROP,
    KIND_PEBBLE_PICK,
    KIND_BH_ACTIVE,
    KIND_STATE_CHANGE,
    KIND_DETECT_CLAIM,
)

# Emission order inside one engine round.  Replay validation checks that
# phases never decrease within a round.
PHASE_ORDER = {
    KIND_BH_ACTIVE: 0,
    KIND_DESTROYED: 1,  # residents die pre-compute, arrivals post-move (phase 5)
    KIND_STATE_CHANGE: 2,
    KIND_WB_WRITE: 3,
    KIND_WB_ERASE: 3,
    KIND_PEBBLE_DROP: 3,
    KIND_PEBBLE_PICK: 3,
    KIND_MOVE: 4,
    KIND_DETECT_CLAIM: 7,
}
PHASE_ARRIVAL_KILL = 5
PHASE_DATA_WIPE = 6


class TraceEvent(NamedTuple):
    round: int
    kind: str
    agent: Optional[int]  # None printed as '-'
    node: Optional[int]
    payload: Tuple[Tuple[str, str], ...] = ()


class TraceParseError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class TraceIntegrityError(ValueError):
    """A parsed trace violates an engine invariant (bad order, unsafe kill)."""


@dataclass
class TraceHeader:
    n: int
    bh: int
    protocol: str
    comm: str
    placement: Tuple[Tuple[int, int], ...]
    adversary: str
    seed: Optional[int]
    rounds: Optional[int] = None  # total simulated rounds, when known


def _fmt_opt(value: Optional[int]) -> str:
    return "-" if value is None else str(value)


def format_event(ev: TraceEvent) -> str:
    parts = [
        f"round={ev.round}",
        f"kind={ev.kind}",
        f"agent={_fmt_opt(ev.agent)}",
        f"node={_fmt_opt(ev.node)}",
    ]
    parts.extend(f"{k}={v}" for k, v in ev.payload)
    return " ".join(parts)


def format_header(h: TraceHeader) -> str:
    placement = ",".join(f"{a}:{node}" for a, node in h.placement)
    seed = "-" if h.seed is None else str(h.seed)
    line = (
        f"header n={h.n} bh={h.bh} protocol={h.protocol} comm={h.comm}"
        f" placement={placement} adversary={h.adversary} seed={seed}"
    )
    if h.rounds is not None:
        line += f" rounds={h.rounds}"
    return line


def write_trace(path: str, header: TraceHeader, events: Iterable[TraceEvent]):
    with open(path, "w") as fh:
        fh.write(format_header(header) + "\n")
        for ev in events:
            fh.write(format_event(ev) + "\n")


def _parse_fields(line: str, lineno: int) -> dict:
    fields = {}
    for token in line.split():
        if "=" not in token:
            raise TraceParseError(lineno, f"malformed field {token!r}")
        key, value = token.split("=", 1)
        if key in fields:
            raise TraceParseError(lineno, f"duplicate field {key!r}")
        fields[key] = value
    return fields


def _parse_int_opt(value: str, lineno: int, key: str) -> Optional[int]:
    if value == "-":
        return None
    try:
        return int(value)
    except ValueError:
        raise TraceParseError(lineno, f"{key} must be int or '-', got {value!r}")


def parse_trace(lines: Iterable[str]) -> Tuple[TraceHeader, List[TraceEvent]]:
    header: Optional[TraceHeader] = None
    events: List[TraceEvent] = []
    for lineno, raw in enumerate(lines, start=1):
        line = raw.strip()
        if not line:
            continue
        if lineno == 1 or (header is None and line.startswith("header ")):
            if not line.startswith("header "):
                raise TraceParseError(lineno, "first line must be the header")
            fields = _parse_fields(line[len("header "):], lineno)
            try:
                placement = tuple(
                    (int(a), int(node))
                    for a, node in (
                        pair.split(":") for pair in fields["placement"].split(",")
                    )
                )
                header = TraceHeader(
                    n=int(fields["n"]),
                    bh=int(fields["bh"]),
                    protocol=fields["protocol"],
                    comm=fields["comm"],
                    placement=placement,
                    adversary=fields["adversary"],
                    seed=_parse_int_opt(fields["seed"], lineno, "seed"),
                    rounds=int(fields["rounds"]) if "rounds" in fields else None,
                )
            except (KeyError, ValueError) as exc:
                raise TraceParseError(lineno, f"bad header: {exc}")
            continue
        fields = _parse_fields(line, lineno)
        for required in ("round", "kind", "agent", "node"):
            if required not in fields:
                raise TraceParseError(lineno, f"missing field {required!r}")
        kind = fields.pop("kind")
        if kind not in KINDS:
            raise TraceParseError(lineno, f"unknown event kind {kind!r}")
        try:
            rnd = int(fields.pop("round"))
        except ValueError:
            raise TraceParseError(lineno, "round must be an integer")
        agent = _parse_int_opt(fields.pop("agent"), lineno, "agent")
        node = _parse_int_opt(fields.pop("node"), lineno, "node")
        payload = tuple(sorted(fields.items()))
        events.append(TraceEvent(rnd, kind, agent, node, payload))
    if header is None:
        raise TraceParseError(1, "empty trace: missing header")
    return header, events


def read_trace(path: str) -> Tuple[TraceHeader, List[TraceEvent]]:
    with open(path) as fh:
        return parse_trace(fh)


def _phase_of(ev: TraceEvent) -> int:
    payload = dict(ev.payload)
    if ev.kind == KIND_DESTROYED and payload.get("cause") == "arrival":
        return PHASE_ARRIVAL_KILL
    if payload.get("cause") == "bh":
        return PHASE_DATA_WIPE
    return PHASE_ORDER[ev.kind]


def validate_events(header: TraceHeader, events: List[TraceEvent]):
    """Re-check the structural trace invariants.

    Rounds never decrease; within a round phases never decrease and agent
    ids never decrease within one phase; agents are destroyed only at the
    black hole (safe-node immunity).
    """
    prev_round = -1
    prev_phase = -1
    prev_agent = -1
    for ev in events:
        if ev.round < prev_round:
            raise TraceIntegrityError(
                f"round {ev.round} after round {prev_round}: rounds must not decrease"
            )
        if ev.round > prev_round:
            prev_phase = -1
            prev_agent = -1
        phase = _phase_of(ev)
        if phase < prev_phase:
            raise TraceIntegrityError(
                f"round {ev.round}: event {ev.kind} out of phase order"
            )
        if phase > prev_phase:
            prev_agent = -1
        if ev.agent is not None:
            if phase == prev_phase and ev.agent < prev_agent:
                raise TraceIntegrityError(
                    f"round {ev.round}: agent order violated in phase {phase}"
                )
            prev_agent = ev.agent
        if ev.kind == KIND_DESTROYED and ev.node != header.bh:
            raise TraceIntegrityError(
                f"round {ev.round}: agent destroyed at node {ev.node},"
                f" not the black hole {header.bh}"
            )
        prev_round = ev.round
        prev_phase = phase
