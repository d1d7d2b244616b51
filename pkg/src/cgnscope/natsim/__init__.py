from .config import (
    Endpoint,
    HairpinMode,
    MappingEntry,
    MappingType,
    NatConfig,
    Pooling,
    PortAllocation,
    Proto,
)
from .engine import (
    AllocationError,
    DeliveryResult,
    DeliveryVerdict,
    Host,
    Nat,
    Packet,
    Router,
    Topology,
)

__all__ = [
    "AllocationError",
    "DeliveryResult",
    "DeliveryVerdict",
    "Endpoint",
    "HairpinMode",
    "Host",
    "MappingEntry",
    "MappingType",
    "Nat",
    "NatConfig",
    "Packet",
    "Pooling",
    "PortAllocation",
    "Proto",
    "Router",
    "Topology",
]
