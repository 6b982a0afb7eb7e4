"""Executable properties over traces: survival, truthful detection, coverage
windows, detection latency, periodicity, and region shrinkage.

Checkers are pure functions of a Timeline, which is reconstructed from a
trace (header + events + round count) and can therefore run equally on a
live run or on a replayed trace file.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .ring import RingConfig
from .trace import (
    KIND_DESTROYED,
    KIND_DETECT_CLAIM,
    KIND_MOVE,
    KIND_STATE_CHANGE,
    TraceEvent,
    TraceHeader,
)


@dataclass
class Verdict:
    name: str
    ok: bool
    detail: str = ""

    def __str__(self):
        word = "PASS" if self.ok else "FAIL"
        tail = f" ({self.detail})" if self.detail else ""
        return f"{self.name}: {word}{tail}"


@dataclass
class Timeline:
    """Per-boundary reconstruction of a run.  Boundary b is the state at the
    start of round b; boundary 0 is the initial placement."""

    n: int
    bh: int
    rounds: int
    agent_ids: Tuple[int, ...]
    positions: List[Dict[int, Optional[int]]]  # per boundary
    machines: List[Dict[int, str]]  # per boundary
    deaths: List[Tuple[int, int]]  # (round, agent)
    claims: List[Tuple[int, int, int]]  # (round, agent, node)
    regions: List[Tuple[int, int, int, int]]  # (round, agent, s_lft, s_rgt)

    @property
    def boundaries(self) -> int:
        return self.rounds + 1

    def live_at(self, b: int) -> List[int]:
        return [a for a, p in self.positions[b].items() if p is not None]

    def visited_at(self, b: int) -> Set[int]:
        return {p for p in self.positions[b].values() if p is not None}

    def first_death_round(self) -> Optional[int]:
        return self.deaths[0][0] if self.deaths else None

    def first_true_claim_round(self) -> Optional[int]:
        for rnd, _, node in self.claims:
            if node == self.bh:
                return rnd
        return None


def build_timeline(
    config_n: int,
    bh: int,
    placement: Sequence[Tuple[int, int]],
    initial_machines: Dict[int, str],
    events: Sequence[TraceEvent],
    rounds: int,
    initial_regions: Sequence[Tuple[int, int, int, int]] = (),
) -> Timeline:
    positions: List[Dict[int, Optional[int]]] = []
    machines: List[Dict[int, str]] = []
    pos: Dict[int, Optional[int]] = {a: node for a, node in placement}
    mach: Dict[int, str] = dict(initial_machines)
    deaths: List[Tuple[int, int]] = []
    claims: List[Tuple[int, int, int]] = []
    regions: List[Tuple[int, int, int, int]] = list(initial_regions)

    by_round: Dict[int, List[TraceEvent]] = {}
    for ev in events:
        by_round.setdefault(ev.round, []).append(ev)

    positions.append(dict(pos))
    machines.append(dict(mach))
    for rnd in range(rounds):
        for ev in by_round.get(rnd, ()):
            if ev.kind == KIND_MOVE:
                pos[ev.agent] = ev.node
            elif ev.kind == KIND_DESTROYED:
                pos[ev.agent] = None
                deaths.append((rnd, ev.agent))
            elif ev.kind == KIND_STATE_CHANGE:
                payload = dict(ev.payload)
                mach[ev.agent] = payload.get("machine", mach[ev.agent])
                if "s_lft" in payload and payload["machine"] == "Initial1":
                    regions.append(
                        (rnd, ev.agent, int(payload["s_lft"]), int(payload["s_rgt"]))
                    )
            elif ev.kind == KIND_DETECT_CLAIM:
                claims.append((rnd, ev.agent, ev.node))
        positions.append(dict(pos))
        machines.append(dict(mach))

    return Timeline(
        n=config_n,
        bh=bh,
        rounds=rounds,
        agent_ids=tuple(sorted(a for a, _ in placement)),
        positions=positions,
        machines=machines,
        deaths=deaths,
        claims=claims,
        regions=regions,
    )


def initial_timeline_info(config: RingConfig, protocol):
    """Starting machine names and (for region-tracking protocols) the initial
    suspicious region, which pre-dates any trace event."""
    machines = {}
    regions = []
    for aid in config.agent_ids:
        st = protocol.initial_agent_state(aid)
        machines[aid] = st.machine
        payload = dict(protocol.state_payload(st))
        if "s_lft" in payload and st.machine == "Initial1":
            regions.append((-1, aid, int(payload["s_lft"]), int(payload["s_rgt"])))
    return machines, regions


def timeline_from_run(config: RingConfig, protocol, events, rounds: int) -> Timeline:
    machines, regions = initial_timeline_info(config, protocol)
    return build_timeline(
        config.n,
        config.bh_index,
        config.placement,
        machines,
        events,
        rounds,
        initial_regions=regions,
    )


# --- checkers ---------------------------------------------------------------


def check_survival(tl: Timeline) -> Verdict:
    for b in range(tl.boundaries):
        if not tl.live_at(b):
            return Verdict("survival", False, f"no live agents at round {b}")
    return Verdict("survival", True, f"{len(tl.live_at(tl.rounds))} survivors")


def check_true_detection(tl: Timeline) -> Verdict:
    for rnd, agent, node in tl.claims:
        if node != tl.bh:
            return Verdict(
                "true-detection",
                False,
                f"agent {agent} claimed node {node} at round {rnd},"
                f" black hole is {tl.bh}",
            )
    return Verdict("true-detection", True, f"{len(tl.claims)} claims, all true")


def _windows_ok(tl: Timeline, lo: int, hi: int, window: int, exclude_bh: bool):
    """Every window of `window` consecutive boundaries inside [lo, hi) must
    see every node (except the black hole when excluded) occupied at least
    once.  Returns the first failing (start, missing_node) or None."""
    need = set(range(tl.n))
    if exclude_bh:
        need.discard(tl.bh)
    if hi - lo < window:
        return None  # no complete window to judge
    last_seen = {x: -1 for x in need}
    for b in range(lo, hi):
        for x in tl.visited_at(b):
            if x in last_seen:
                last_seen[x] = b
        if b - lo + 1 >= window:
            start = b - window + 1
            for x, seen in last_seen.items():
                if seen < start:
                    return start, x
    return None


def check_coverage(
    tl: Timeline,
    window: int,
    post_window: Optional[int] = None,
    settle: int = 0,
) -> Verdict:
    """Pre-anomaly coverage at `window`; post-detection coverage at
    `post_window` (defaults to 2n) once `settle` rounds have elapsed after
    the last anomaly event (death or claim).  The transitional phase in
    between is exempted: survivors are regrouping, not patrolling."""
    name = f"coverage:{window}"
    first_death = tl.first_death_round()
    first_claim = tl.first_true_claim_round()
    pre_hi = tl.boundaries
    if first_death is not None:
        pre_hi = min(pre_hi, first_death)
    if first_claim is not None:
        pre_hi = min(pre_hi, first_claim)
    bad = _windows_ok(tl, 0, pre_hi, window, exclude_bh=True)
    if bad is not None:
        return Verdict(
            name, False, f"window at round {bad[0]} missed node {bad[1]}"
        )
    if first_claim is not None:
        last_event = max(
            [rnd for rnd, _ in tl.deaths] + [rnd for rnd, _, _ in tl.claims]
        )
        w2 = post_window if post_window is not None else 2 * tl.n
        bad = _windows_ok(
            tl, last_event + 1 + settle, tl.boundaries, w2, exclude_bh=True
        )
        if bad is not None:
            return Verdict(
                name,
                False,
                f"post-detection window at round {bad[0]} missed node {bad[1]}",
            )
    return Verdict(name, True)


def check_latency(tl: Timeline, bound: int) -> Verdict:
    name = f"latency:{bound}"
    first_death = tl.first_death_round()
    if first_death is None:
        return Verdict(name, True, "no agent destroyed")
    first_claim = tl.first_true_claim_round()
    if first_claim is not None and first_claim <= first_death + bound:
        return Verdict(
            name, True, f"destroyed at {first_death}, detected at {first_claim}"
        )
    got = "none" if first_claim is None else str(first_claim)
    return Verdict(
        name,
        False,
        f"destroyed at {first_death}, true claim by {first_death + bound}"
        f" required, got {got}",
    )


def check_periodicity(
    tl: Timeline, period: int, machine: str, skip_boundary_zero: bool = False
) -> Verdict:
    """All live agents are simultaneously in `machine` exactly at boundaries
    that are multiples of the period, judged until the first death or claim
    (anomaly handling is aperiodic by design)."""
    name = f"periodicity:{period}"
    horizon = tl.boundaries
    if tl.deaths:
        horizon = min(horizon, tl.deaths[0][0])
    if tl.claims:
        horizon = min(horizon, tl.claims[0][0])
    start = 1 if skip_boundary_zero else 0
    for b in range(start, horizon):
        live = tl.live_at(b)
        all_in = all(tl.machines[b][a] == machine for a in live)
        expected = b % period == 0
        if all_in != expected:
            state = "in" if all_in else "not in"
            return Verdict(
                name,
                False,
                f"round {b}: all agents {state} {machine},"
                f" expected {'yes' if expected else 'no'}",
            )
    return Verdict(name, True)


def check_region_shrinkage(tl: Timeline) -> Verdict:
    """Per-iteration shrinkage |S'| <= ceil(|S|/2)+1 on single-death
    iterations, and cumulatively |S_i| <= ceil(|S_0|/2^i)+2 over the first i
    modifications."""
    name = "shrinkage"
    if not tl.regions:
        return Verdict(name, True, "no region reports")
    # region per dispatch round, as reported by the lowest-id agent
    per_round: Dict[int, Tuple[int, int]] = {}
    reporter: Dict[int, int] = {}
    for rnd, agent, lft, rgt in tl.regions:
        if rnd not in per_round or agent < reporter[rnd]:
            per_round[rnd] = (lft, rgt)
            reporter[rnd] = agent
    rounds = sorted(per_round)
    sizes = [per_round[r][1] - per_round[r][0] + 1 for r in rounds]
    s0 = sizes[0]
    modifications = 0
    for i in range(1, len(rounds)):
        prev_size, size = sizes[i - 1], sizes[i]
        deaths = [d for d, _ in tl.deaths if rounds[i - 1] <= d < rounds[i]]
        if len(deaths) == 1 and size > (prev_size + 1) // 2 + 1:
            return Verdict(
                name,
                False,
                f"iteration at round {rounds[i - 1]}: one death shrank"
                f" {prev_size} to {size}, allowed {(prev_size + 1) // 2 + 1}",
            )
        if size != prev_size:
            modifications += 1
            allowed = -(-s0 // (2 ** modifications)) + 2
            if size > allowed:
                return Verdict(
                    name,
                    False,
                    f"after {modifications} modifications the region is"
                    f" {size}, allowed {allowed}",
                )
    return Verdict(name, True, f"{modifications} modifications from |S0|={s0}")


@dataclass(frozen=True)
class PropertyChecker:
    """A named property with parameters, applied to a timeline."""

    kind: str  # survival | true-detection | coverage | latency | periodicity | shrinkage
    param: Optional[int] = None
    machine: str = ""
    settle: int = 0

    def check(self, tl: Timeline) -> Verdict:
        if self.kind == "survival":
            return check_survival(tl)
        if self.kind == "true-detection":
            return check_true_detection(tl)
        if self.kind == "coverage":
            if self.param is None or self.param < 1:
                raise ValueError("coverage needs a window >= 1")
            return check_coverage(tl, self.param, settle=self.settle)
        if self.kind == "latency":
            if self.param is None or self.param < 1:
                raise ValueError("latency needs a bound >= 1")
            return check_latency(tl, self.param)
        if self.kind == "periodicity":
            if self.param is None or self.param < 1:
                raise ValueError("periodicity needs a period >= 1")
            return check_periodicity(tl, self.param, self.machine)
        if self.kind == "shrinkage":
            return check_region_shrinkage(tl)
        raise ValueError(f"unknown property {self.kind!r}")


def parse_checks(spec: str, protocol) -> List[PropertyChecker]:
    """Parse a --check list like 'survival,coverage,latency:80'."""
    checks = []
    for item in spec.split(","):
        item = item.strip()
        if not item:
            continue
        kind, _, arg = item.partition(":")
        if kind in ("survival", "true-detection", "shrinkage"):
            checks.append(PropertyChecker(kind))
        elif kind == "coverage":
            window = int(arg) if arg else protocol.coverage_window
            checks.append(
                PropertyChecker("coverage", window, settle=protocol.recovery_rounds)
            )
        elif kind == "latency":
            if not arg:
                raise ValueError("latency needs a bound, e.g. latency:80")
            checks.append(PropertyChecker("latency", int(arg)))
        elif kind == "periodicity":
            period = int(arg) if arg else protocol.period
            checks.append(
                PropertyChecker("periodicity", period, machine=protocol.sync_machine)
            )
        else:
            raise ValueError(f"unknown check {kind!r}")
    return checks
