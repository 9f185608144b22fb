#!/usr/bin/env python3
"""
Experiment configuration: the validated ExperimentConfig model and its flat
key=value text form (UTF-8, '#' comments, one key per field).

Protocol fields are flat keys too; 'protocol' selects the kind.
"""

import hashlib
import logging
from typing import Any, Dict, FrozenSet, Iterable, Mapping, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from .graph.temporal_graph import DynamicsParams
from .models import KIND_FIELDS, ProtocolSpec
from .schemas import ProtocolKind, Topology

logger = logging.getLogger(__name__)


class ConfigError(ValueError):
    """Invalid experiment configuration, with line context when available"""

    def __init__(self, message: str, line: Optional[int] = None, key: Optional[str] = None):
        self.line = line
        self.key = key
        prefix = ""
        if line is not None:
            prefix += f"line {line}: "
        if key is not None:
            prefix += f"key '{key}': "
        super().__init__(prefix + message)


class ExperimentConfig(BaseModel):
    """One experiment. Defaults reproduce the reference setup."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    # --- Topology ---
    topology: Topology = Topology.RANDOM
    n: int = Field(default=10_000, ge=2)
    avg_degree: float = Field(default=15.0, gt=0)
    active_fraction: float = Field(default=0.8, gt=0, le=1)
    hub_count: int = Field(default=80, ge=0)
    hub_degree_min: int = Field(default=250, ge=1)
    hub_degree_max: int = Field(default=300, ge=1)
    total_directed_entries: Optional[int] = Field(default=None, ge=0)

    # --- Dynamics ---
    p_activate: float = Field(default=0.01, ge=0, le=1)
    p_deactivate: float = Field(default=0.0025, ge=0, le=1)
    attach_count: Optional[int] = Field(default=None, ge=1)
    min_degree: int = Field(default=1, ge=0)
    pin_hubs: bool = True
    warmup_steps: int = Field(default=0, ge=0)

    # --- Protocol and run ---
    protocol: ProtocolSpec = Field(default_factory=ProtocolSpec)
    epochs: int = Field(default=10_000, ge=0)
    ttl: int = Field(default=20, ge=1)
    max_steps: Optional[int] = Field(default=None, ge=1)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _check_cross_fields(self) -> "ExperimentConfig":
        active = self.active_count
        if active < 2:
            raise ValueError(f"n * active_fraction gives {active} active nodes, need 2")
        if self.max_steps is not None and self.max_steps < self.ttl:
            raise ValueError(f"max_steps ({self.max_steps}) must be >= ttl ({self.ttl})")
        if self.topology is Topology.RANDOM:
            if self.avg_degree > active - 1:
                raise ValueError(
                    f"avg_degree {self.avg_degree} impossible with {active} active nodes"
                )
        else:
            if self.hub_count >= active:
                raise ValueError(f"hub_count must be below {active} active nodes")
            if self.hub_degree_min > self.hub_degree_max:
                raise ValueError("hub_degree_min exceeds hub_degree_max")
            if self.hub_count and self.hub_degree_max > active - self.hub_count:
                raise ValueError("hub_degree_max exceeds the number of non-hub nodes")
            if 2 * self.hub_count * self.hub_degree_min > self.resolved_total_entries:
                raise ValueError("hub degrees exceed total_directed_entries")
        return self

    # --- Derived values ---

    @property
    def active_count(self) -> int:
        return int(round(self.n * self.active_fraction))

    @property
    def resolved_attach_count(self) -> int:
        if self.attach_count is not None:
            return self.attach_count
        return max(1, int(round(self.avg_degree)))

    @property
    def resolved_total_entries(self) -> int:
        if self.total_directed_entries is not None:
            return self.total_directed_entries
        return int(round(self.active_count * self.avg_degree))

    @property
    def resolved_max_steps(self) -> int:
        if self.max_steps is not None:
            return self.max_steps
        if self.protocol.failsafe_active:
            return max(4 * self.ttl, self.protocol.resolved_failsafe_timeout + self.ttl)
        return self.ttl

    def dynamics_params(self, hubs: Iterable[int] = ()) -> DynamicsParams:
        pinned = frozenset(int(h) for h in hubs) if self.pin_hubs else frozenset()
        return DynamicsParams(
            p_activate=self.p_activate,
            p_deactivate=self.p_deactivate,
            attach_count=self.resolved_attach_count,
            pinned=pinned,
            min_degree=self.min_degree,
        )

    def config_hash(self) -> str:
        """Digest of every field except the seed"""
        body = serialize_config(self.model_copy(update={"seed": 0}))
        return hashlib.sha256(body.encode("utf-8")).hexdigest()[:12]

    def with_protocol(self, protocol: ProtocolSpec) -> "ExperimentConfig":
        return self.model_copy(update={"protocol": protocol})

    def with_seed(self, seed: int) -> "ExperimentConfig":
        return self.model_copy(update={"seed": seed})


# --- Flat key mapping ---

PROTOCOL_KEY = "protocol"
TOP_LEVEL_KEYS: FrozenSet[str] = frozenset(
    name for name in ExperimentConfig.model_fields if name != PROTOCOL_KEY
)
PROTOCOL_KEYS: FrozenSet[str] = frozenset(
    name for name in ProtocolSpec.model_fields if name != "kind"
)
ALL_KEYS: FrozenSet[str] = TOP_LEVEL_KEYS | PROTOCOL_KEYS | {PROTOCOL_KEY}


def _format_value(value: Any) -> str:
    if hasattr(value, "value"):
        return str(value.value)
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def to_flat(config: ExperimentConfig) -> Dict[str, Any]:
    """Flat key -> value for every set field relevant to the protocol kind"""
    flat: Dict[str, Any] = {}
    for name in ExperimentConfig.model_fields:
        if name == PROTOCOL_KEY:
            continue
        value = getattr(config, name)
        if value is not None:
            flat[name] = value
    spec = config.protocol
    flat[PROTOCOL_KEY] = spec.kind
    for name in sorted(KIND_FIELDS[spec.kind]):
        value = getattr(spec, name)
        if value is not None:
            flat[name] = value
    return flat


def serialize_config(config: ExperimentConfig) -> str:
    lines = [f"{key}={_format_value(value)}" for key, value in to_flat(config).items()]
    return "\n".join(lines) + "\n"


def config_from_mapping(
    values: Mapping[str, Any], line_of: Optional[Mapping[str, int]] = None
) -> ExperimentConfig:
    """Build and validate an ExperimentConfig from flat keys"""
    line_of = line_of or {}
    top: Dict[str, Any] = {}
    protocol: Dict[str, Any] = {}
    for key, value in values.items():
        if key not in ALL_KEYS:
            raise ConfigError("unknown key", line_of.get(key), key)
        if key == PROTOCOL_KEY:
            protocol["kind"] = value
        elif key in PROTOCOL_KEYS:
            protocol[key] = value
        else:
            top[key] = value

    raw_kind = protocol.get("kind", ProtocolKind.BROADCAST)
    try:
        kind = raw_kind if isinstance(raw_kind, ProtocolKind) else ProtocolKind(raw_kind)
    except ValueError:
        choices = ", ".join(k.value for k in ProtocolKind)
        raise ConfigError(
            f"unknown protocol '{raw_kind}' (choose from {choices})",
            line_of.get(PROTOCOL_KEY),
            PROTOCOL_KEY,
        ) from None
    for key in protocol:
        if key != "kind" and key not in KIND_FIELDS[kind]:
            raise ConfigError(
                f"not a parameter of {kind.value}", line_of.get(key), key
            )
    top[PROTOCOL_KEY] = protocol

    try:
        return ExperimentConfig.model_validate(top)
    except ValidationError as exc:
        error = exc.errors()[0]
        loc = [str(part) for part in error.get("loc", ())]
        key = next((part for part in reversed(loc) if part in ALL_KEYS), None)
        if loc and loc[0] == PROTOCOL_KEY and key is None:
            key = PROTOCOL_KEY
        message = str(error.get("msg", "invalid value")).removeprefix("Value error, ")
        raise ConfigError(message, line_of.get(key) if key else None, key) from exc


def read_config_values(source: str) -> Tuple[Dict[str, str], Dict[str, int]]:
    """Raw key -> value text and key -> line number, before any validation"""
    values: Dict[str, str] = {}
    line_of: Dict[str, int] = {}
    for number, raw in enumerate(source.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError("expected key=value", number)
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in ALL_KEYS:
            raise ConfigError("unknown key", number, key)
        if key in values:
            raise ConfigError(f"duplicate key (first on line {line_of[key]})", number, key)
        values[key] = value
        line_of[key] = number
    return values, line_of


def parse_config(source: str) -> ExperimentConfig:
    """Parse flat key=value text; every unspecified field takes its default"""
    values, line_of = read_config_values(source)
    config = config_from_mapping(values, line_of)
    logger.debug(f"Parsed config {config.config_hash()} from {len(values)} keys")
    return config


def with_field(config: ExperimentConfig, key: str, value: Any) -> ExperimentConfig:
    """Copy of config with one flat key replaced and everything re-validated"""
    flat = to_flat(config)
    flat[key] = value
    return config_from_mapping(flat)
