"""Simulated DHT peer population backed by natsim topologies.

Every query and response is routed through the owning topology, so peer
reachability, NAT filtering, and mapping lifetimes all come from the
simulator rather than from bookkeeping shortcuts. All fixture topologies
share one rendezvous address: the public vantage the crawler queries from,
and the endpoint peers announce to (which is what keeps their mappings
admitting our queries under restrictive mapping types).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Optional

from ..natsim import Endpoint, Packet, Proto, Topology
from . import krpc
from .records import PeerIdentity

RENDEZVOUS = Endpoint("198.51.100.1", 6881)
ANNOUNCE_INTERVAL = 15.0
VANTAGE_HOST = "vantage"


@dataclass
class SimPeer:
    topology: Topology
    host_id: str
    addr: str
    port: int
    nodeid: bytes
    public_ep: tuple[str, int] = ("", 0)
    last_announce: float = -1e9
    table: list[PeerIdentity] = field(default_factory=list)

    @property
    def identity(self) -> PeerIdentity:
        return PeerIdentity(self.public_ep[0], self.public_ep[1], self.nodeid)

    @property
    def internal_identity(self) -> PeerIdentity:
        return PeerIdentity(self.addr, self.port, self.nodeid)


class SimDhtNetwork:
    """Peer directory plus honest packet-level transport for the crawler."""

    def __init__(self, rendezvous: Endpoint = RENDEZVOUS):
        self.rendezvous = rendezvous
        self.peers: list[SimPeer] = []
        self.by_public: dict[tuple[str, int], SimPeer] = {}
        self.vclock = 0.0
        self._lock = threading.Lock()

    def now(self) -> float:
        return self.vclock

    def _tick(self, step: float = 0.05) -> float:
        self.vclock += step
        return self.vclock

    def add_peer(self, topology: Topology, host_id: str, port: int, nodeid: bytes) -> SimPeer:
        peer = SimPeer(
            topology, host_id, topology.hosts[host_id].addresses[0], port, nodeid
        )
        self.peers.append(peer)
        self._announce(peer)
        return peer

    def _announce(self, peer: SimPeer) -> None:
        """Peer refreshes its presence toward the rendezvous endpoint."""
        at = max(self._tick(), peer.topology.clock)
        pkt = Packet(
            Proto.UDP, Endpoint(peer.addr, peer.port),
            Endpoint(self.rendezvous.ip, self.rendezvous.port),
        )
        result = peer.topology.send(peer.host_id, pkt, at=at)
        if not result.delivered:
            raise RuntimeError(f"peer {peer.host_id} cannot reach rendezvous: {result}")
        public = (result.packet.src.ip, result.packet.src.port)
        if peer.public_ep != public:
            self.by_public.pop(peer.public_ep, None)
            peer.public_ep = public
            self.by_public[public] = peer
        peer.last_announce = at

    def request(self, endpoint, payload: bytes) -> Optional[bytes]:
        with self._lock:
            peer = self.by_public.get(tuple(endpoint))
            if peer is None:
                return None
            if self.vclock - peer.last_announce > ANNOUNCE_INTERVAL:
                self._announce(peer)
            at = max(self._tick(), peer.topology.clock)
            query = Packet(
                Proto.UDP,
                Endpoint(self.rendezvous.ip, self.rendezvous.port),
                Endpoint(endpoint[0], endpoint[1]),
                payload=payload,
            )
            inbound = peer.topology.send(VANTAGE_HOST, query, at=at)
            if not inbound.delivered or inbound.to_host != peer.host_id:
                return None
            reply = self._serve(peer, inbound.packet.payload)
            if reply is None:
                return None
            at = max(self._tick(), peer.topology.clock)
            outbound = peer.topology.send(
                peer.host_id,
                Packet(
                    Proto.UDP, Endpoint(peer.addr, peer.port),
                    Endpoint(self.rendezvous.ip, self.rendezvous.port),
                    payload=reply,
                ),
                at=at,
            )
            if not outbound.delivered:
                return None
            return outbound.packet.payload

    def _serve(self, peer: SimPeer, payload: bytes) -> Optional[bytes]:
        try:
            msg = krpc.parse_message(payload)
        except ValueError:
            return None
        if msg.kind is not krpc.MessageKind.QUERY:
            return None
        if msg.method == "ping":
            return krpc.build_ping_response(msg.transaction_id, peer.nodeid)
        if msg.method == "find_node":
            target = msg.body.get(b"target", b"")
            if not isinstance(target, bytes) or len(target) != krpc.NODEID_BYTES:
                return None
            closest = sorted(
                peer.table, key=lambda ident: krpc.xor_distance(ident.nodeid, target)
            )[:8]
            blob = krpc.encode_nodes([
                krpc.CompactNodeInfo(ident.nodeid, ident.ip, ident.port)
                for ident in closest
            ])
            return krpc.build_find_node_response(msg.transaction_id, peer.nodeid, blob)
        return None
