"""Protocol registry: one stepper per protocol name."""

from __future__ import annotations

from typing import Optional

from ..ring import RingConfig
from .base import Protocol
from .coloc_pebble import ColocPebbleProtocol, ColocState, as_whiteboard_variant
from .f2f import F2FProtocol, F2FState, dest_of, required_agents
from .scat_pebble import ScatPebbleProtocol, ScatState, multiplicity_dispatch
from .scat_whiteboard import (
    ScatWhiteboardProtocol,
    WBState,
    multiplicity_dispatch_wb,
)

PROTOCOL_CLASSES = {
    "f2f": F2FProtocol,
    "pbl-coloc": ColocPebbleProtocol,
    "wb-coloc": ColocPebbleProtocol,  # same relay, pebbles simulated by marks
    "pbl-scat": ScatPebbleProtocol,
    "wb-scat": ScatWhiteboardProtocol,
}


def make_protocol(config: RingConfig, mutation: Optional[str] = None) -> Protocol:
    return PROTOCOL_CLASSES[config.protocol](config, mutation=mutation)


__all__ = [
    "ColocPebbleProtocol",
    "ColocState",
    "F2FProtocol",
    "F2FState",
    "PROTOCOL_CLASSES",
    "Protocol",
    "ScatPebbleProtocol",
    "ScatState",
    "ScatWhiteboardProtocol",
    "WBState",
    "as_whiteboard_variant",
    "dest_of",
    "make_protocol",
    "multiplicity_dispatch",
    "multiplicity_dispatch_wb",
    "required_agents",
]
