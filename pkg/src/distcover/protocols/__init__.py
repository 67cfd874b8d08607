"""Message-passing protocols for distributed covering and packing."""

from .cmip2 import CMIP2Protocol, leaf_threshold
from .linial_saks import LinialSaksPhase, ls_membership, phase_count
from .submodular import SubmodularCoverProtocol
from .wvc import WVCProtocol

__all__ = [
    "CMIP2Protocol",
    "LinialSaksPhase",
    "SubmodularCoverProtocol",
    "WVCProtocol",
    "leaf_threshold",
    "ls_membership",
    "phase_count",
]
