"""IPv4 address classification and AS/RIR attribution.

Classifies addresses against the reserved-for-internal-use blocks, against
a routing table (longest-prefix match), and relative to the public address
a measurement server observed for the same client.
"""

from __future__ import annotations

import enum
import ipaddress
from typing import Iterable, Optional


def ip_to_int(addr: str) -> int:
    """Parse a dotted-quad IPv4 address, raising ValueError if invalid."""
    return int(ipaddress.IPv4Address(addr))


def int_to_ip(value: int) -> str:
    return str(ipaddress.IPv4Address(value))


class ReservedRange(enum.Enum):
    """Address blocks reserved for internal use (RFC 1918 and RFC 6598)."""

    R192X = "192.168.0.0/16"
    R172X = "172.16.0.0/12"
    R10X = "10.0.0.0/8"
    R100X = "100.64.0.0/10"

    @property
    def label(self) -> str:
        """Short name without the leading R, e.g. '100X'."""
        return self.name[1:]

    @property
    def network(self) -> ipaddress.IPv4Network:
        return ipaddress.IPv4Network(self.value)


_RESERVED_BOUNDS = [
    (int(r.network.network_address), int(r.network.broadcast_address), r)
    for r in ReservedRange
]

# Never legitimate subscriber addresses; rejected wherever records are
# ingested: loopback, link-local, multicast/class-E and above.
_FORBIDDEN = [
    ipaddress.IPv4Network("127.0.0.0/8"),
    ipaddress.IPv4Network("169.254.0.0/16"),
    ipaddress.IPv4Network("224.0.0.0/4"),
]
_FORBIDDEN_BOUNDS = [
    (int(n.network_address), int(n.broadcast_address)) for n in _FORBIDDEN
]


def classify_reserved(addr: str) -> Optional[ReservedRange]:
    """Return the reserved range containing addr, or None if it is routable.

    The four ranges are disjoint, so at most one can match.
    """
    value = ip_to_int(addr)
    for lo, hi, rng in _RESERVED_BOUNDS:
        if lo <= value <= hi:
            return rng
    return None


def is_forbidden(addr: str) -> bool:
    """True for addresses that cannot belong to a subscriber host."""
    value = ip_to_int(addr)
    return any(lo <= value <= hi for lo, hi in _FORBIDDEN_BOUNDS)


class AddrCategory(enum.Enum):
    """How an internally observed address relates to the public view."""

    PRIVATE = "private"
    UNROUTED = "unrouted"
    ROUTED_MATCH = "routed_match"
    ROUTED_MISMATCH = "routed_mismatch"


class Region(enum.Enum):
    ARIN = "ARIN"
    LACNIC = "LACNIC"
    RIPE = "RIPE"
    AFRINIC = "AFRINIC"
    APNIC = "APNIC"
    UNKNOWN = "Unknown"


class RoutingTable:
    """Longest-prefix-match table mapping prefixes to origin ASNs.

    The file format is one `prefix,asn` pair per line with `#` comments,
    e.g. `1.0.0.0/8,13335`.
    """

    def __init__(self, entries: Iterable[tuple[str, int]] = ()):
        # prefix length -> {masked address int -> asn}
        self._by_len: dict[int, dict[int, int]] = {}
        self._asns: set[int] = set()
        self._count = 0
        for prefix, asn in entries:
            self.add(prefix, asn)

    def add(self, prefix: str, asn: int) -> None:
        net = ipaddress.IPv4Network(prefix)
        bucket = self._by_len.setdefault(net.prefixlen, {})
        bucket[int(net.network_address)] = int(asn)
        self._asns.add(int(asn))
        self._count += 1

    def __len__(self) -> int:
        return self._count

    @property
    def asns(self) -> set[int]:
        """All origin ASNs present in the table."""
        return set(self._asns)

    def lookup_asn(self, addr: str) -> Optional[int]:
        """Longest-prefix-match origin ASN for addr, or None."""
        value = ip_to_int(addr)
        for plen in sorted(self._by_len, reverse=True):
            masked = value & ~((1 << (32 - plen)) - 1) if plen else 0
            asn = self._by_len[plen].get(masked)
            if asn is not None:
                return asn
        return None

    def contains(self, addr: str) -> bool:
        return self.lookup_asn(addr) is not None

    @classmethod
    def from_file(cls, path) -> "RoutingTable":
        table = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                try:
                    prefix, asn = line.split(",")
                    table.add(prefix.strip(), int(asn))
                except ValueError as exc:
                    raise ValueError(
                        f"{path}:{lineno}: bad routing entry {line!r}"
                    ) from exc
        return table


def lookup_asn(addr: str, table: RoutingTable) -> Optional[int]:
    return table.lookup_asn(addr)


def classify_observed(addr: str, ip_pub: str, table: RoutingTable) -> AddrCategory:
    """Categorize a locally observed address against the public view.

    Private if reserved; Unrouted if absent from the routing table;
    RoutedMatch only on exact equality with ip_pub; RoutedMismatch
    otherwise. The categories are mutually exclusive and exhaustive.
    """
    if classify_reserved(addr) is not None:
        return AddrCategory.PRIVATE
    if not table.contains(addr):
        return AddrCategory.UNROUTED
    if addr == ip_pub:
        return AddrCategory.ROUTED_MATCH
    return AddrCategory.ROUTED_MISMATCH


class RirMap:
    """ASN to RIR region lookup, loaded from `asn,region` CSV lines."""

    def __init__(self, entries: Iterable[tuple[int, Region]] = ()):
        self._regions: dict[int, Region] = {}
        for asn, region in entries:
            self._regions[int(asn)] = region

    def add(self, asn: int, region: Region) -> None:
        self._regions[int(asn)] = region

    def __len__(self) -> int:
        return len(self._regions)

    def region_of(self, asn: int) -> Region:
        return self._regions.get(asn, Region.UNKNOWN)

    @classmethod
    def from_file(cls, path) -> "RirMap":
        rir = cls()
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                try:
                    asn, name = line.split(",")
                    rir.add(int(asn), Region[name.strip().upper()])
                except (ValueError, KeyError) as exc:
                    raise ValueError(
                        f"{path}:{lineno}: bad RIR entry {line!r}"
                    ) from exc
        return rir


def region_of(asn: int, rir: RirMap) -> Region:
    return rir.region_of(asn)
