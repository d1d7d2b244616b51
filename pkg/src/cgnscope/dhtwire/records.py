"""Peer identities and leakage observation records.

A peer is identified by the full (endpoint, nodeid) tuple; two records
sharing a nodeid but differing endpoints are distinct peers, which also
blunts DHT-poisoning bias.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Optional


@dataclass(frozen=True, order=True)
class PeerIdentity:
    ip: str
    port: int
    nodeid: bytes

    @property
    def endpoint(self) -> str:
        return f"{self.ip}:{self.port}"


@dataclass
class PeerRecord:
    """One leakage observation: reporter claims knowledge of reported."""

    ts: float
    reporter: PeerIdentity
    reported: PeerIdentity
    responded_ping: bool
    reporter_asn: Optional[int] = field(default=None, compare=False)

    def to_json(self) -> str:
        return json.dumps({
            "ts": self.ts,
            "reporter_ip": self.reporter.ip,
            "reporter_port": self.reporter.port,
            "reporter_nodeid_hex": self.reporter.nodeid.hex(),
            "reported_ip": self.reported.ip,
            "reported_port": self.reported.port,
            "reported_nodeid_hex": self.reported.nodeid.hex(),
            "responded_ping": self.responded_ping,
        }, separators=(",", ":"))

    @classmethod
    def from_json(cls, line: str) -> "PeerRecord":
        obj = json.loads(line)
        return cls(
            ts=float(obj["ts"]),
            reporter=PeerIdentity(
                obj["reporter_ip"], int(obj["reporter_port"]),
                bytes.fromhex(obj["reporter_nodeid_hex"]),
            ),
            reported=PeerIdentity(
                obj["reported_ip"], int(obj["reported_port"]),
                bytes.fromhex(obj["reported_nodeid_hex"]),
            ),
            responded_ping=bool(obj["responded_ping"]),
        )


def write_records(records: Iterable[PeerRecord], path) -> int:
    count = 0
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(record.to_json() + "\n")
            count += 1
    return count


def read_records(path) -> list[PeerRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                records.append(PeerRecord.from_json(line))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"{path}:{lineno}: bad peer record: {exc}") from None
    return records
