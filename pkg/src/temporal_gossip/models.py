#!/usr/bin/env python3
"""
Pydantic models and data structures for the temporal gossip simulator
"""

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, List, Optional, Set

from pydantic import BaseModel, ConfigDict, Field, model_validator

from .schemas import DDFMode, FluffKind, Phase, ProtocolKind

# Protocol fields read by each kind; the config layer rejects anything else.
_ANONYMITY_FIELDS = frozenset(
    {"fluff_kind", "p", "ddf_x", "ddf_mode", "failsafe_enabled", "failsafe_timeout"}
)
KIND_FIELDS: Dict[ProtocolKind, FrozenSet[str]] = {
    ProtocolKind.BROADCAST: frozenset(),
    ProtocolKind.PROBABILISTIC_BROADCAST: frozenset({"p"}),
    ProtocolKind.FIXED_PROBABILITY: frozenset({"p"}),
    ProtocolKind.FIXED_FANOUT: frozenset({"fanout_n"}),
    ProtocolKind.DEGREE_DEPENDENT: frozenset({"ddf_x", "ddf_mode"}),
    ProtocolKind.DANDELION: _ANONYMITY_FIELDS | {"stem_steps"},
    ProtocolKind.DANDELION_PP: _ANONYMITY_FIELDS
    | {"relayer_fraction", "role_epoch_len"},
}

TUNABLE_FIELDS: Dict[ProtocolKind, str] = {
    ProtocolKind.PROBABILISTIC_BROADCAST: "p",
    ProtocolKind.FIXED_PROBABILITY: "p",
    ProtocolKind.FIXED_FANOUT: "fanout_n",
    ProtocolKind.DEGREE_DEPENDENT: "ddf_x",
}


class ProtocolSpec(BaseModel):
    """Dissemination algorithm plus its parameters. p is a percentage (0-100)."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ProtocolKind = ProtocolKind.BROADCAST
    p: Optional[float] = Field(default=None, ge=0, le=100)
    fanout_n: Optional[int] = Field(default=None, ge=1)
    ddf_x: Optional[float] = Field(default=None, gt=0)
    ddf_mode: DDFMode = DDFMode.LOG
    stem_steps: int = Field(default=4, ge=0)
    relayer_fraction: float = Field(default=0.8, ge=0, le=1)
    role_epoch_len: int = Field(default=100, ge=1)
    failsafe_timeout: Optional[int] = Field(default=None, ge=1)
    failsafe_enabled: Optional[bool] = None
    fluff_kind: FluffKind = FluffKind.BROADCAST

    @model_validator(mode="after")
    def _check_kind_parameters(self) -> "ProtocolSpec":
        needs_p = self.kind in (
            ProtocolKind.PROBABILISTIC_BROADCAST,
            ProtocolKind.FIXED_PROBABILITY,
        ) or (self.kind.is_anonymous and self.fluff_kind is FluffKind.FIXED_PROBABILITY)
        needs_x = self.kind is ProtocolKind.DEGREE_DEPENDENT or (
            self.kind.is_anonymous and self.fluff_kind is FluffKind.DEGREE_DEPENDENT
        )
        if needs_p and self.p is None:
            raise ValueError(f"{self.kind.value} requires p")
        if self.kind is ProtocolKind.FIXED_FANOUT and self.fanout_n is None:
            raise ValueError("FixedFanout requires fanout_n")
        if needs_x:
            if self.ddf_x is None:
                raise ValueError(f"{self.kind.value} requires ddf_x")
            if self.ddf_mode is DDFMode.LOG and self.ddf_x <= 1:
                raise ValueError("ddf_x must be > 1 in Log mode")
        return self

    @property
    def failsafe_active(self) -> bool:
        if self.kind is ProtocolKind.DANDELION:
            return bool(self.failsafe_enabled)
        if self.kind is ProtocolKind.DANDELION_PP:
            return self.failsafe_enabled is not False
        return False

    @property
    def resolved_failsafe_timeout(self) -> int:
        if self.failsafe_timeout is not None:
            return self.failsafe_timeout
        if self.kind is ProtocolKind.DANDELION_PP:
            return 2 * self.role_epoch_len
        return 2 * self.stem_steps + 5

    @property
    def tunable_field(self) -> Optional[str]:
        return TUNABLE_FIELDS.get(self.kind)

    @property
    def parameter_label(self) -> str:
        name = self.tunable_field
        if name is None:
            return ""
        return f"{name}={getattr(self, name):g}"


# Data classes
@dataclass(frozen=True)
class MessageEnvelope:
    """One in-flight hop of a disseminated message"""

    msg_id: int
    origin: int
    target: int
    phase: Phase
    stem_hops_remaining: int
    ttl_remaining: int
    sender: int
    receiver: int
    deliver_at: int
    hops: int = 1


@dataclass
class NodeProtocolState:
    """Per-node, per-epoch protocol memory"""

    seen: Set[int] = field(default_factory=set)
    stem_relayed: Dict[int, int] = field(default_factory=dict)
    fluff_seen: Set[int] = field(default_factory=set)


@dataclass
class ForwardDecision:
    """Outcome of a forwarding decision at one node"""

    targets: List[int]
    phase: Phase = Phase.FLUFF
    stem_hops_remaining: int = 0
    degree_queries: int = 0


@dataclass(frozen=True)
class EpochRecord:
    """Outcome of one communication attempt between applicant and holder"""

    success: bool
    messages_sent: int
    delay: Optional[int] = None
    lost_to_churn: int = 0
    failsafe_triggers: int = 0
    degree_queries: int = 0
    delivered: int = 0
    pending: int = 0
    applicant: Optional[int] = None
    holder: Optional[int] = None
    degenerate: bool = False
