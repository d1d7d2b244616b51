"""NAT device configuration and translation-table entries."""

from __future__ import annotations

import enum
import ipaddress
from dataclasses import dataclass, field
from typing import NamedTuple, Optional


class Proto(enum.Enum):
    UDP = "udp"
    TCP = "tcp"


class Endpoint(NamedTuple):
    ip: str
    port: int

    def __str__(self) -> str:
        return f"{self.ip}:{self.port}"

    @classmethod
    def parse(cls, text: str) -> "Endpoint":
        ip, _, port = text.rpartition(":")
        return cls(ip, int(port))


class MappingType(enum.Enum):
    """Filtering/reuse policy, from most restrictive to most permissive."""

    SYMMETRIC = "symmetric"
    PORT_RESTRICTED = "port_restricted"
    ADDRESS_RESTRICTED = "address_restricted"
    FULL_CONE = "full_cone"


class PortAllocation(enum.Enum):
    PRESERVE = "preserve"
    SEQUENTIAL = "sequential"
    RANDOM = "random"
    RANDOM_CHUNK = "random_chunk"


class Pooling(enum.Enum):
    PAIRED = "paired"
    ARBITRARY = "arbitrary"


class HairpinMode(enum.Enum):
    OFF = "off"
    TRANSLATE = "translate"
    PRESERVE_SOURCE = "preserve_source"


MIN_CHUNK = 64
MAX_CHUNK = 16384


@dataclass(frozen=True)
class NatConfig:
    """Full behavioral configuration of one NAT device.

    external_pool entries may themselves be internal-range addresses when
    the device sits below another NAT (the in-home device of a NAT444
    chain gets its external address from the carrier's internal space).
    """

    mapping_type: MappingType
    port_alloc: PortAllocation
    pooling: Pooling
    external_pool: tuple[str, ...]
    udp_timeout: float = 120.0
    tcp_timeout: float = 7200.0
    hairpin: HairpinMode = HairpinMode.OFF
    internal_range: str = "10.0.0.0/8"
    chunk_size: Optional[int] = None

    def __post_init__(self):
        if not self.external_pool:
            raise ValueError("external_pool must be nonempty")
        for addr in self.external_pool:
            ipaddress.IPv4Address(addr)
        ipaddress.IPv4Network(self.internal_range)
        if self.udp_timeout <= 0 or self.tcp_timeout <= 0:
            raise ValueError("timeouts must be positive")
        if self.port_alloc is PortAllocation.RANDOM_CHUNK:
            cs = self.chunk_size
            if cs is None:
                raise ValueError("random_chunk allocation requires chunk_size")
            if cs & (cs - 1) or not MIN_CHUNK <= cs <= MAX_CHUNK:
                raise ValueError(
                    f"chunk_size must be a power of two in "
                    f"[{MIN_CHUNK}, {MAX_CHUNK}], got {cs}"
                )
        elif self.chunk_size is not None:
            raise ValueError("chunk_size only applies to random_chunk")

    def timeout(self, proto: Proto) -> float:
        return self.udp_timeout if proto is Proto.UDP else self.tcp_timeout


@dataclass
class MappingEntry:
    """One live translation entry.

    Under a symmetric NAT the lookup key is (int_ep, dst_key); otherwise
    int_ep alone identifies the entry and dst_key is None. `contacted`
    accumulates remote endpoints this mapping has sent to, which drives
    the address/port-restricted inbound filters.
    """

    proto: Proto
    int_ep: Endpoint
    ext_ep: Endpoint
    dst_key: Optional[Endpoint]
    last_active: float
    contacted: set[Endpoint] = field(default_factory=set)

    def admits(self, src: Endpoint, mapping_type: MappingType) -> bool:
        """Inbound filter check for a packet from src."""
        if mapping_type is MappingType.FULL_CONE:
            return True
        if mapping_type is MappingType.SYMMETRIC:
            return src == self.dst_key
        if mapping_type is MappingType.PORT_RESTRICTED:
            return src in self.contacted
        # address restricted: any source port from a contacted IP
        return any(src.ip == ep.ip for ep in self.contacted)
