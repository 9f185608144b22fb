from .protocol_schema import (
    DDFMode,
    FluffKind,
    Phase,
    ProtocolKind,
    ReportFormat,
    Role,
    Topology,
)

__all__ = [
    "DDFMode",
    "FluffKind",
    "Phase",
    "ProtocolKind",
    "ReportFormat",
    "Role",
    "Topology",
]
