#!/usr/bin/env python3
"""
Protocol Schema
Enumerations shared by the overlay, the dissemination protocols and the harness
"""

from enum import Enum


class ProtocolKind(Enum):
    """Dissemination algorithms the simulator can run"""

    BROADCAST = "Broadcast"
    PROBABILISTIC_BROADCAST = "ProbabilisticBroadcast"
    FIXED_PROBABILITY = "FixedProbability"
    FIXED_FANOUT = "FixedFanout"
    DEGREE_DEPENDENT = "DegreeDependent"
    DANDELION = "Dandelion"
    DANDELION_PP = "DandelionPP"

    @property
    def is_anonymous(self) -> bool:
        return self in (ProtocolKind.DANDELION, ProtocolKind.DANDELION_PP)

    @property
    def short_name(self) -> str:
        return _SHORT_NAMES[self]


_SHORT_NAMES = {
    ProtocolKind.BROADCAST: "BCAST",
    ProtocolKind.PROBABILISTIC_BROADCAST: "PB",
    ProtocolKind.FIXED_PROBABILITY: "FP",
    ProtocolKind.FIXED_FANOUT: "F-FAN",
    ProtocolKind.DEGREE_DEPENDENT: "DDF",
    ProtocolKind.DANDELION: "DANDELION",
    ProtocolKind.DANDELION_PP: "DANDELION++",
}


class FluffKind(Enum):
    """Forwarding rule applied during the fluff phase of the anonymity protocols"""

    BROADCAST = "Broadcast"
    FIXED_PROBABILITY = "FixedProbability"
    DEGREE_DEPENDENT = "DegreeDependent"


class DDFMode(Enum):
    """Shape of the degree dependent forwarding function"""

    LOG = "Log"
    EXP = "Exp"


class Phase(Enum):
    """Dissemination phase carried by an envelope"""

    STEM = "Stem"
    FLUFF = "Fluff"


class Role(Enum):
    """Dandelion++ per role-epoch node role"""

    RELAYER = "Relayer"
    DIFFUSER = "Diffuser"


class Topology(Enum):
    """Initial overlay construction"""

    RANDOM = "Random"
    HIERARCHICAL = "Hierarchical"


class ReportFormat(Enum):
    CSV = "csv"
    TEXT = "text"
