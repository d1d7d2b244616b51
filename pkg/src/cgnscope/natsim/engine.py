"""Deterministic virtual network with NAT devices on a linear hop chain.

A Topology is a chain of hops (routers or NATs) between numbered network
segments. Hosts attach to a segment via their `position`: position 0 is the
innermost segment, position n (with n hops) is the public segment where the
measurement server lives. Packets from a host below the top climb the chain
outward; packets from the public side descend it, being matched against live
NAT mappings and filtered per mapping type. All time is virtual seconds and
all randomness comes from one seeded generator, so identical event sequences
replay bit-identically.

TTL semantics: the TTL is decremented once per hop; a packet whose TTL
reaches zero is dropped at that hop, but only after the hop's NAT state has
been created/refreshed (connection tracking sees the packet before the
forwarding decision discards it). This is what lets TTL-limited keepalives
refresh every NAT up to and including the hop where they die.
"""

from __future__ import annotations

import enum
import ipaddress
import random
import zlib
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

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

PORT_MIN = 1024
PORT_MAX = 65535


class AllocationError(RuntimeError):
    """External pool or port space exhausted."""


@dataclass(frozen=True)
class Packet:
    proto: Proto
    src: Endpoint
    dst: Endpoint
    ttl: int = 64
    payload: bytes = b""


class DeliveryVerdict(enum.Enum):
    DELIVERED = "delivered"
    DROPPED_TTL = "dropped_ttl"
    DROPPED_FILTER = "dropped_filter"
    DROPPED_NO_ROUTE = "dropped_no_route"


@dataclass(frozen=True)
class DeliveryResult:
    verdict: DeliveryVerdict
    hop: Optional[int] = None
    to_host: Optional[str] = None
    packet: Optional[Packet] = None

    @property
    def delivered(self) -> bool:
        return self.verdict is DeliveryVerdict.DELIVERED


@dataclass(frozen=True)
class Host:
    host_id: str
    addresses: tuple[str, ...]
    position: int


class Router:
    """Stateless hop: decrements TTL, forwards."""

    def __repr__(self):
        return "Router()"


class Nat:
    """Stateful hop holding a NatConfig plus its live translation table."""

    def __init__(self, config: NatConfig):
        self.config = config
        self.mappings: dict[tuple, MappingEntry] = {}
        self.by_ext: dict[tuple[Proto, Endpoint], MappingEntry] = {}
        self._used: dict[tuple[Proto, str], set[int]] = {}
        # Sequential allocation cursor is shared across the pool so that
        # consecutive allocations stay numerically adjacent even under
        # arbitrary pooling; it never wraps below PORT_MIN.
        self._seq_cursor: dict[Proto, int] = {Proto.UDP: PORT_MIN, Proto.TCP: PORT_MIN}
        net = ipaddress.IPv4Network(config.internal_range)
        self._internal_lo = int(net.network_address)
        self._internal_hi = int(net.broadcast_address)

    def __repr__(self):
        return f"Nat({self.config.mapping_type.value})"

    def _key(self, proto: Proto, int_ep: Endpoint, dst: Endpoint) -> tuple:
        if self.config.mapping_type is MappingType.SYMMETRIC:
            return (proto, int_ep, dst)
        return (proto, int_ep)

    def _in_internal_range(self, ip: str) -> bool:
        value = int(ipaddress.IPv4Address(ip))
        return self._internal_lo <= value <= self._internal_hi

    def translate_out(self, pkt: Packet, now: float, rng: random.Random) -> Packet:
        """Create or refresh the outbound mapping and rewrite the source."""
        key = self._key(pkt.proto, pkt.src, pkt.dst)
        entry = self.mappings.get(key)
        if entry is None:
            if not self._in_internal_range(pkt.src.ip):
                raise ValueError(
                    f"source {pkt.src} outside internal range "
                    f"{self.config.internal_range}"
                )
            ext = self._allocate(pkt.proto, pkt.src, rng)
            dst_key = pkt.dst if self.config.mapping_type is MappingType.SYMMETRIC else None
            entry = MappingEntry(pkt.proto, pkt.src, ext, dst_key, now)
            self.mappings[key] = entry
            self.by_ext[(pkt.proto, ext)] = entry
        entry.contacted.add(pkt.dst)
        entry.last_active = now
        return replace(pkt, src=entry.ext_ep)

    def match_in(self, pkt: Packet, now: float) -> tuple[Optional[DeliveryVerdict], Optional[Packet]]:
        """Match an inbound packet against live mappings.

        Returns (None, rewritten packet) on success, or a drop verdict.
        Filtered packets never refresh the entry they failed against.
        """
        entry = self.by_ext.get((pkt.proto, pkt.dst))
        if entry is None:
            return DeliveryVerdict.DROPPED_NO_ROUTE, None
        if not entry.admits(pkt.src, self.config.mapping_type):
            return DeliveryVerdict.DROPPED_FILTER, None
        entry.last_active = now
        return None, replace(pkt, dst=entry.int_ep)

    def expire(self, now: float) -> int:
        """Drop every entry idle strictly longer than its proto timeout."""
        dead = [
            (key, entry)
            for key, entry in self.mappings.items()
            if now - entry.last_active > self.config.timeout(entry.proto)
        ]
        for key, entry in dead:
            del self.mappings[key]
            del self.by_ext[(entry.proto, entry.ext_ep)]
            used = self._used.get((entry.proto, entry.ext_ep.ip))
            if used is not None:
                used.discard(entry.ext_ep.port)
        return len(dead)

    # -- allocation ----------------------------------------------------

    def _allocate(self, proto: Proto, int_ep: Endpoint, rng: random.Random) -> Endpoint:
        pool = self.config.external_pool
        if self.config.pooling is Pooling.PAIRED:
            ip = pool[zlib.crc32(int_ep.ip.encode()) % len(pool)]
        else:
            ip = pool[rng.randrange(len(pool))]
        port = self._allocate_port(proto, ip, int_ep, rng)
        used = self._used.setdefault((proto, ip), set())
        used.add(port)
        return Endpoint(ip, port)

    def _allocate_port(self, proto: Proto, ip: str, int_ep: Endpoint, rng: random.Random) -> int:
        used = self._used.setdefault((proto, ip), set())
        mode = self.config.port_alloc
        if mode is PortAllocation.PRESERVE:
            if int_ep.port not in used:
                return int_ep.port
            for port in range(int_ep.port + 1, PORT_MAX + 1):
                if port not in used:
                    return port
            raise AllocationError(f"no free port above {int_ep.port} on {ip}")
        if mode is PortAllocation.SEQUENTIAL:
            port = self._seq_cursor[proto]
            while port <= PORT_MAX and port in used:
                port += 1
            if port > PORT_MAX:
                raise AllocationError(f"sequential port space exhausted on {ip}")
            self._seq_cursor[proto] = port + 1
            return port
        if mode is PortAllocation.RANDOM:
            if len(used) >= PORT_MAX - PORT_MIN + 1:
                raise AllocationError(f"port space exhausted on {ip}")
            while True:
                port = rng.randint(PORT_MIN, PORT_MAX)
                if port not in used:
                    return port
        # random allocation within the subscriber's fixed chunk
        base = self.chunk_base(int_ep.ip)
        size = self.config.chunk_size
        chunk_used = sum(1 for p in used if base <= p < base + size)
        if chunk_used >= size:
            raise AllocationError(f"chunk [{base},{base + size}) exhausted on {ip}")
        while True:
            port = rng.randrange(base, base + size)
            if port not in used:
                return port

    def chunk_base(self, int_ip: str) -> int:
        """Deterministic chunk start for a subscriber, aligned and >= 1024."""
        size = self.config.chunk_size
        first = (PORT_MIN + size - 1) // size
        count = 65536 // size
        index = first + zlib.crc32(int_ip.encode()) % (count - first)
        return index * size


Hop = Union[Router, Nat]


class Topology:
    """Linear chain of hops with hosts attached to its segments."""

    def __init__(self, hops: Sequence[Hop], seed: int = 0, trace: bool = False):
        self.hops: list[Hop] = list(hops)
        self.hosts: dict[str, Host] = {}
        self.rng = random.Random(seed)
        self._addr_index: dict[tuple[int, str], Host] = {}
        self._clock = 0.0
        self.trace_enabled = trace
        self.trace: list[str] = []

    @property
    def clock(self) -> float:
        return self._clock

    @property
    def depth(self) -> int:
        return len(self.hops)

    def add_host(self, host_id: str, addresses, position: int = 0) -> Host:
        if isinstance(addresses, str):
            addresses = (addresses,)
        if not 0 <= position <= len(self.hops):
            raise ValueError(f"position {position} outside 0..{len(self.hops)}")
        host = Host(host_id, tuple(addresses), position)
        if host_id in self.hosts:
            raise ValueError(f"duplicate host id {host_id!r}")
        for addr in host.addresses:
            ipaddress.IPv4Address(addr)
            key = (position, addr)
            if key in self._addr_index:
                raise ValueError(f"duplicate address {addr} on segment {position}")
        self.hosts[host_id] = host
        for addr in host.addresses:
            self._addr_index[(position, addr)] = host
        return host

    def add_server(self, host_id: str, addresses) -> Host:
        """Attach a host to the public segment beyond the last hop."""
        return self.add_host(host_id, addresses, position=len(self.hops))

    def nat_at(self, hop_index: int) -> Nat:
        hop = self.hops[hop_index - 1]
        if not isinstance(hop, Nat):
            raise ValueError(f"hop {hop_index} is not a NAT")
        return hop

    def nats(self) -> list[tuple[int, Nat]]:
        return [(i + 1, h) for i, h in enumerate(self.hops) if isinstance(h, Nat)]

    def expire(self, now: Optional[float] = None) -> int:
        """Remove idle mappings; advances the clock to `now`."""
        if now is None:
            now = self._clock
        if now < self._clock:
            raise ValueError("virtual clock cannot move backwards")
        self._clock = now
        return sum(h.expire(now) for h in self.hops if isinstance(h, Nat))

    def send(self, from_host: str, pkt: Packet, at: Optional[float] = None) -> DeliveryResult:
        """Inject a packet from a host at virtual time `at`.

        Expiry runs before routing, so a send at time t never matches a
        mapping that was idle past its timeout at t.
        """
        try:
            origin = self.hosts[from_host]
        except KeyError:
            raise ValueError(f"unknown host id {from_host!r}") from None
        if pkt.ttl < 1 or pkt.ttl > 255:
            raise ValueError(f"ttl {pkt.ttl} outside 1..255")
        now = self._clock if at is None else float(at)
        self.expire(now)
        if origin.position >= len(self.hops):
            result = self._route_down(len(self.hops), pkt, pkt.ttl, now, origin)
        else:
            result = self._route_up(origin, pkt, now)
        if self.trace_enabled:
            hop = "-" if result.hop is None else str(result.hop)
            self.trace.append(
                f"{now:.3f} {pkt.proto.value} {pkt.src} {pkt.dst} "
                f"{pkt.ttl} {result.verdict.value} {hop}"
            )
        return result

    # -- routing -------------------------------------------------------

    def _host_at(self, segment: int, ip: str, origin: Host) -> Optional[Host]:
        host = self._addr_index.get((segment, ip))
        if host is not None and host is not origin:
            return host
        return None

    def _route_up(self, origin: Host, pkt: Packet, now: float) -> DeliveryResult:
        cur = pkt
        ttl = pkt.ttl
        segment = origin.position
        top = len(self.hops)
        while True:
            target = self._host_at(segment, cur.dst.ip, origin)
            if target is not None:
                return DeliveryResult(
                    DeliveryVerdict.DELIVERED, None, target.host_id, replace(cur, ttl=ttl)
                )
            if segment == top:
                return DeliveryResult(DeliveryVerdict.DROPPED_NO_ROUTE)
            hop_index = segment + 1
            hop = self.hops[hop_index - 1]
            ttl -= 1
            if isinstance(hop, Nat):
                hairpin_entry = hop.by_ext.get((cur.proto, cur.dst))
                if hairpin_entry is not None:
                    return self._hairpin(hop, hop_index, hairpin_entry, cur, ttl, now, origin)
                cur = hop.translate_out(cur, now, self.rng)
            if ttl == 0:
                return DeliveryResult(DeliveryVerdict.DROPPED_TTL, hop_index)
            segment += 1

    def _hairpin(
        self,
        nat: Nat,
        hop_index: int,
        entry: MappingEntry,
        cur: Packet,
        ttl: int,
        now: float,
        origin: Host,
    ) -> DeliveryResult:
        """Reflect a packet addressed to one of this NAT's own live
        external endpoints back toward the mapped internal host."""
        mode = nat.config.hairpin
        if mode is HairpinMode.OFF:
            return DeliveryResult(DeliveryVerdict.DROPPED_NO_ROUTE, hop_index)
        translated = nat.translate_out(cur, now, self.rng)
        if ttl == 0:
            return DeliveryResult(DeliveryVerdict.DROPPED_TTL, hop_index)
        inner_src = translated.src if mode is HairpinMode.TRANSLATE else cur.src
        if not entry.admits(inner_src, nat.config.mapping_type):
            return DeliveryResult(DeliveryVerdict.DROPPED_FILTER, hop_index)
        entry.last_active = now
        inner = Packet(cur.proto, inner_src, entry.int_ep, ttl, cur.payload)
        return self._route_down(hop_index - 1, inner, ttl, now, origin)

    def _route_down(
        self, from_segment: int, pkt: Packet, ttl: int, now: float, origin: Host
    ) -> DeliveryResult:
        cur = replace(pkt, ttl=ttl)
        segment = from_segment
        while True:
            target = self._host_at(segment, cur.dst.ip, origin)
            if target is not None:
                return DeliveryResult(
                    DeliveryVerdict.DELIVERED, None, target.host_id, replace(cur, ttl=ttl)
                )
            if segment == 0:
                return DeliveryResult(DeliveryVerdict.DROPPED_NO_ROUTE)
            hop_index = segment
            hop = self.hops[hop_index - 1]
            ttl -= 1
            if isinstance(hop, Nat):
                verdict, rewritten = hop.match_in(cur, now)
                if verdict is not None:
                    return DeliveryResult(verdict, hop_index)
                cur = rewritten
            if ttl == 0:
                return DeliveryResult(DeliveryVerdict.DROPPED_TTL, hop_index)
            segment -= 1
