"""Adversary strategies for the byzantine black hole, plus an exhaustive
explorer over adversary nondeterminism for model checking.

The adversary is omniscient: a decision may depend on the full global state,
including every agent's locals.  Positive verdicts from the explorer are
therefore valid against any weaker adversary too.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from typing import Dict, List, NamedTuple, Optional, Tuple

from .engine import (
    INACTIVE,
    AdversaryDecision,
    AdversaryView,
    EngineOptions,
    DEFAULT_OPTIONS,
    GlobalState,
    PreparedRound,
    ProtocolIntegrityError,
    apply_round,
    initial_state,
    prepare_round,
)
from .ring import CommModel, RingConfig


class NeverActive:
    name = "never"

    def decide(self, view: AdversaryView, state: GlobalState) -> AdversaryDecision:
        return INACTIVE


class AlwaysActive:
    def __init__(self, destroy_data: bool = False):
        self.destroy_data = destroy_data
        self.name = "always:destroy" if destroy_data else "always"

    def decide(self, view: AdversaryView, state: GlobalState) -> AdversaryDecision:
        return AdversaryDecision(True, self.destroy_data)


class KillNthVisit:
    """Activate on the n-th round in which some agent would enter the black
    hole (counting rounds, not agents); inactive before and after."""

    def __init__(self, nth: int, destroy_data: bool = False):
        if nth < 1:
            raise ValueError("nth must be >= 1")
        self.nth = nth
        self.destroy_data = destroy_data
        self.seen = 0
        self.fired = False
        self.name = f"kill-nth-visit:{nth}" + (":destroy" if destroy_data else "")

    def decide(self, view: AdversaryView, state: GlobalState) -> AdversaryDecision:
        if self.fired or not view.agents_entering_bh:
            return INACTIVE
        self.seen += 1
        if self.seen == self.nth:
            self.fired = True
            return AdversaryDecision(True, self.destroy_data)
        return INACTIVE


class KillAgent:
    """Activate exactly on rounds where the given agent would enter the
    black hole."""

    def __init__(self, agent_id: int, destroy_data: bool = False):
        self.agent_id = agent_id
        self.destroy_data = destroy_data
        self.name = f"kill-agent:{agent_id}" + (":destroy" if destroy_data else "")

    def decide(self, view: AdversaryView, state: GlobalState) -> AdversaryDecision:
        if self.agent_id in view.agents_entering_bh:
            return AdversaryDecision(True, self.destroy_data)
        return INACTIVE


class ScheduledScript:
    """Replay a fixed per-round schedule; unlisted rounds are inactive."""

    def __init__(self, schedule: Dict[int, AdversaryDecision], name: str = "script"):
        self.schedule = dict(schedule)
        self.name = name

    def decide(self, view: AdversaryView, state: GlobalState) -> AdversaryDecision:
        return self.schedule.get(view.round, INACTIVE)

    def dump(self) -> str:
        lines = []
        for rnd in sorted(self.schedule):
            dec = self.schedule[rnd]
            lines.append(
                f"round={rnd} active={1 if dec.active else 0}"
                f" destroy={1 if dec.destroy_data else 0}"
            )
        return "\n".join(lines) + ("\n" if lines else "")

    @staticmethod
    def parse(text: str) -> "ScheduledScript":
        schedule: Dict[int, AdversaryDecision] = {}
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            fields = dict(tok.split("=", 1) for tok in line.split())
            try:
                rnd = int(fields["round"])
                active = fields["active"] == "1"
                destroy = fields.get("destroy", "0") == "1"
            except (KeyError, ValueError) as exc:
                raise ValueError(f"script line {lineno}: {exc}")
            schedule[rnd] = AdversaryDecision.make(active, destroy and active)
        return ScheduledScript(schedule)

    @staticmethod
    def load(path: str) -> "ScheduledScript":
        with open(path) as fh:
            return ScheduledScript.parse(fh.read())


class SeededRandom:
    """Independent per-round coin flips from a single 64-bit seed; all draws
    derive from the seed, so runs are reproducible."""

    def __init__(self, p_active: float, p_destroy: float, seed: int):
        self.p_active = p_active
        self.p_destroy = p_destroy
        self.rng = random.Random(seed)
        self.name = f"random:{p_active},{p_destroy}"

    def decide(self, view: AdversaryView, state: GlobalState) -> AdversaryDecision:
        a = self.rng.random() < self.p_active
        d = self.rng.random() < self.p_destroy
        return AdversaryDecision(a, a and d)


def parse_adversary(spec: str, seed: Optional[int] = None):
    """Build a strategy from a CLI spec like 'never', 'always:destroy',
    'kill-nth-visit:2:destroy', 'kill-agent:1', 'script:<path>',
    'random:0.1,0.5'."""
    parts = spec.split(":")
    name = parts[0]
    if name == "never":
        return NeverActive()
    if name == "always":
        return AlwaysActive(destroy_data="destroy" in parts[1:])
    if name == "kill-nth-visit":
        if len(parts) < 2:
            raise ValueError("kill-nth-visit needs a count, e.g. kill-nth-visit:1")
        return KillNthVisit(int(parts[1]), destroy_data="destroy" in parts[2:])
    if name == "kill-agent":
        if len(parts) < 2:
            raise ValueError("kill-agent needs an agent id, e.g. kill-agent:1")
        return KillAgent(int(parts[1]), destroy_data="destroy" in parts[2:])
    if name == "script":
        if len(parts) < 2:
            raise ValueError("script needs a path, e.g. script:cex.script")
        return ScheduledScript.load(":".join(parts[1:]))
    if name == "random":
        if len(parts) < 2 or "," not in parts[1]:
            raise ValueError("random needs probabilities, e.g. random:0.1,0.5")
        pa, pd = (float(x) for x in parts[1].split(","))
        return SeededRandom(pa, pd, seed if seed is not None else 0)
    raise ValueError(f"unknown adversary {name!r}")


# --- Exhaustive exploration ------------------------------------------------

ALL_DECISIONS = (
    AdversaryDecision(False, False),
    AdversaryDecision(True, False),
    AdversaryDecision(True, True),
)


def decision_branches(
    view: AdversaryView,
    comm: CommModel,
    options: EngineOptions,
    suppress_destroy: bool,
) -> Tuple[AdversaryDecision, ...]:
    """The behaviorally distinct decisions for this round.

    Activation matters only if some agent is entering the black hole (or
    sitting on it, when residents are killed); destruction matters only if
    data is stored there.  When neither holds, all decisions coincide.
    Destroy-only branching is deferred while the black hole's store is
    unchanged and unvisited: wiping anywhere in such an interval yields the
    same state, so one branch point covers the whole interval.
    """
    kill_relevant = bool(view.agents_entering_bh) or (
        options.kill_resident and bool(view.agents_at_bh)
    )
    store = view.data_at_bh
    has_data = (
        store.pebbles > 0 or store.pebble_marks > 0 or not store.whiteboard_empty()
    )
    if kill_relevant and has_data:
        return ALL_DECISIONS
    if kill_relevant:
        return ALL_DECISIONS[:2]
    if has_data and not suppress_destroy:
        return (ALL_DECISIONS[0], ALL_DECISIONS[2])
    return ALL_DECISIONS[:1]


@dataclass
class Verdict:
    status: str  # PASS | FAIL | INCONCLUSIVE
    violation: Optional[str] = None
    violation_round: Optional[int] = None
    schedule: Optional[ScheduledScript] = None
    stats: Dict[str, int] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.status == "PASS"


class _Budget:
    def __init__(self, limit: int):
        self.limit = limit
        self.used = 0

    def spend(self) -> bool:
        self.used += 1
        return self.used <= self.limit


class _Violation(Exception):
    def __init__(self, kind: str, round_: int, schedule: Dict[int, AdversaryDecision]):
        super().__init__(kind)
        self.kind = kind
        self.round = round_
        self.schedule = dict(schedule)


class _BudgetExceeded(Exception):
    pass


def _coverage_ages_update(ages, state: GlobalState, n: int, cap: int):
    occupied = [False] * n
    for a in state.agents:
        if a.alive:
            occupied[a.pos] = True
    return tuple(
        0 if occupied[i] else min(ages[i] + 1, cap) for i in range(n)
    )


class _Coverage(NamedTuple):
    """Post-detection coverage obligation tracker.

    Armed by the first true claim.  Every death or claim re-opens a settling
    window (the protocol's recovery bound) during which survivors may
    legitimately regroup; once it elapses, every node except the black hole
    must be revisited within every 2n-round window until the horizon."""

    armed: bool = False
    settle_until: int = 0
    ages: Optional[Tuple[int, ...]] = None


class _Explorer:
    """Depth-first search over adversary decisions, branching only at
    decision-relevant rounds, memoizing states by the earliest round at
    which they were fully explored."""

    def __init__(
        self,
        config: RingConfig,
        protocol,
        horizon: int,
        options: EngineOptions,
        budget: int,
        check_coverage: bool = True,
    ):
        self.config = config
        self.protocol = protocol
        self.horizon = horizon
        self.options = options
        self.budget = _Budget(budget)
        self.check_coverage = check_coverage
        self.window = 2 * config.n
        self.settle = protocol.recovery_rounds
        self.memo: Dict[Tuple, int] = {}
        self.stats = {"applies": 0, "memo_hits": 0, "branch_points": 0, "peak_round": 0}
        self.schedule: Dict[int, AdversaryDecision] = {}

    def _judge(self, state: GlobalState, prev_claims: int, prev_alive: int, cov: _Coverage):
        """Return (violation_kind or None, new_coverage)."""
        alive = sum(1 for a in state.agents if a.alive)
        if alive == 0:
            return "survival: all agents destroyed", cov
        bh = self.config.bh_index
        anomaly = alive < prev_alive
        for aid, node, rnd in state.claims[prev_claims:]:
            anomaly = True
            if node != bh:
                return (
                    f"true-detection: agent {aid} claimed node {node},"
                    f" black hole is {bh}",
                    cov,
                )
            if self.check_coverage and not cov.armed:
                cov = cov._replace(armed=True)
        if not cov.armed:
            return None, cov
        if anomaly:
            # survivors get the protocol's recovery budget to regroup
            return None, _Coverage(True, state.round + self.settle, None)
        if state.round < cov.settle_until:
            return None, cov
        ages = cov.ages if cov.ages is not None else (0,) * self.config.n
        ages = _coverage_ages_update(ages, state, self.config.n, self.window + 1)
        for i, age in enumerate(ages):
            if i != bh and age > self.window:
                return (
                    f"coverage: node {i} unvisited for more than"
                    f" {self.window} rounds after detection settled",
                    cov,
                )
        return None, cov._replace(ages=ages)

    def _dfs(self, state: GlobalState, cov: _Coverage, suppress_destroy: bool):
        if state.round >= self.horizon:
            return
        if not cov.armed:
            key = (state.agents, state.nodes, suppress_destroy)
            seen = self.memo.get(key)
            if seen is not None and seen <= state.round:
                self.stats["memo_hits"] += 1
                return
            self.memo[key] = state.round
        prepared = prepare_round(state, self.config, self.protocol)
        branches = decision_branches(
            prepared.view, self.config.comm_model, self.options, suppress_destroy
        )
        if len(branches) > 1:
            self.stats["branch_points"] += 1
        kill_relevant = bool(prepared.view.agents_entering_bh) or (
            self.options.kill_resident and bool(prepared.view.agents_at_bh)
        )
        prev_alive = sum(1 for a in state.agents if a.alive)
        for decision in branches:
            if not self.budget.spend():
                raise _BudgetExceeded()
            self.stats["applies"] += 1
            if decision.active:
                self.schedule[state.round] = decision
            try:
                nxt, _ = apply_round(
                    state,
                    self.config,
                    prepared,
                    decision,
                    self.options,
                    emit_events=False,
                )
            except ProtocolIntegrityError as exc:
                raise _Violation(f"integrity: {exc}", state.round, self.schedule)
            self.stats["peak_round"] = max(self.stats["peak_round"], nxt.round)
            violation, new_cov = self._judge(nxt, len(state.claims), prev_alive, cov)
            if violation is not None:
                raise _Violation(violation, state.round, self.schedule)
            if decision.destroy_data or kill_relevant or (
                nxt.nodes[self.config.bh_index] != state.nodes[self.config.bh_index]
            ):
                child_suppress = False
            elif len(branches) > 1 and not decision.active:
                # deferred the destroy choice: don't re-branch on the same data
                child_suppress = True
            else:
                child_suppress = suppress_destroy
            self._dfs(nxt, new_cov, child_suppress)
            if decision.active:
                del self.schedule[state.round]

    def run(self) -> Optional[_Violation]:
        start = initial_state(self.config, self.protocol)
        try:
            self._dfs(start, _Coverage(), False)
        except _Violation as v:
            return v
        return None


def explore_all(
    config: RingConfig,
    protocol,
    horizon: int,
    options: EngineOptions = DEFAULT_OPTIONS,
    budget: int = 5_000_000,
    check_coverage: bool = True,
    minimize: bool = True,
) -> Verdict:
    """Search every adversary behavior up to `horizon` rounds for a violation
    of survival, truthful detection, or post-detection coverage.

    Returns PASS, FAIL with a replayable minimal counterexample schedule, or
    INCONCLUSIVE if the node budget is exhausted.
    """
    import sys

    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, horizon * 4 + 10_000))
    try:
        explorer = _Explorer(config, protocol, horizon, options, budget, check_coverage)
        try:
            violation = explorer.run()
        except _BudgetExceeded:
            return Verdict("INCONCLUSIVE", stats=dict(explorer.stats, budget=budget))
        if violation is None:
            return Verdict("PASS", stats=dict(explorer.stats))
        best = violation
        if minimize:
            # Shortest-prefix re-search: the first horizon admitting any
            # violation gives the minimal counterexample length; inactive
            # branches are tried first, biasing toward fewer active rounds.
            for h in range(1, best.round + 1):
                sub = _Explorer(
                    config, protocol, h, options, budget, check_coverage
                )
                try:
                    found = sub.run()
                except _BudgetExceeded:
                    break
                if found is not None:
                    best = found
                    break
        return Verdict(
            "FAIL",
            violation=best.kind,
            violation_round=best.round,
            schedule=ScheduledScript(best.schedule, name="counterexample"),
            stats=dict(explorer.stats),
        )
    finally:
        sys.setrecursionlimit(old_limit)
