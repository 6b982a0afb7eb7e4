"""Deterministic simulator and model checker for perpetual exploration of an
oriented ring containing one adversary-controlled byzantine black hole."""

from .ring import (
    CommModel,
    ConfigError,
    Direction,
    NodeStore,
    RingConfig,
    clockwise_distance,
    neighbor,
)
from .engine import (
    Action,
    AdversaryDecision,
    AgentRecord,
    EngineOptions,
    GlobalState,
    ProtocolIntegrityError,
    Snapshot,
    initial_state,
    run_round,
    run_until,
)
from .adversary import explore_all, parse_adversary
from .protocols import make_protocol, required_agents

__all__ = [
    "Action",
    "AdversaryDecision",
    "AgentRecord",
    "CommModel",
    "ConfigError",
    "Direction",
    "EngineOptions",
    "GlobalState",
    "NodeStore",
    "ProtocolIntegrityError",
    "RingConfig",
    "Snapshot",
    "clockwise_distance",
    "explore_all",
    "initial_state",
    "make_protocol",
    "neighbor",
    "parse_adversary",
    "required_agents",
    "run_round",
    "run_until",
]
