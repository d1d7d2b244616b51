"""DHT crawl loop: find_node fan-out with leakage-triggered escalation.

Each contacted peer gets five find_node queries with random targets; any
response carrying a reserved-range endpoint escalates to extra queries in
batches of ten, for as long as new internal peers keep turning up. Learned
peers are deduplicated per reporter by full (endpoint, nodeid) identity and
emitted as PeerRecords; responsiveness of each learned peer to a ping is
recorded alongside.
"""

from __future__ import annotations

import random
import socket
import threading
import time
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Protocol

from ..addrmodel import classify_reserved, is_forbidden
from . import krpc
from .records import PeerIdentity, PeerRecord

QUERIES_PER_PEER = 5
ESCALATION_BATCH = 10
RESPONSE_TIMEOUT = 5.0
RETRANSMIT_AFTER = 2.0


class Transport(Protocol):
    def request(self, endpoint: tuple[str, int], payload: bytes) -> Optional[bytes]:
        """Send a query datagram; return the response payload or None."""

    def now(self) -> float:
        ...


@dataclass
class CrawlStats:
    attempted: int = 0
    responsive: int = 0
    unresponsive: int = 0
    records: int = 0
    escalated_peers: int = 0
    skipped_forbidden: int = 0


@dataclass
class _PeerResult:
    endpoint: tuple[str, int]
    responded: bool
    reporter: Optional[PeerIdentity] = None
    learned: list[PeerIdentity] = field(default_factory=list)
    queries_sent: int = 0
    escalated: bool = False


class Crawler:
    """Crawl state machine over an abstract query transport.

    `concurrency` bounds the in-flight peer jobs; shared crawl state
    (frontier, dedup sets, emitted records) is only touched on the calling
    thread, so any transport only needs to tolerate concurrent request().
    """

    def __init__(
        self,
        transport: Transport,
        seed: int = 0,
        nodeid: Optional[bytes] = None,
        concurrency: int = 64,
    ):
        self.transport = transport
        self.rng = random.Random(seed)
        self.nodeid = nodeid if nodeid is not None else krpc.random_nodeid(self.rng)
        self.concurrency = max(1, concurrency)
        self.stats = CrawlStats()
        self._tid_lock = threading.Lock()
        self._tid = 0
        self._ping_cache: dict[tuple[str, int], bool] = {}

    # -- low-level query helpers ----------------------------------------

    def _next_tid(self) -> bytes:
        with self._tid_lock:
            self._tid = (self._tid + 1) % 65536
            return self._tid.to_bytes(2, "big")

    def _find_node(self, endpoint, target: bytes) -> Optional[krpc.KrpcMessage]:
        tid = self._next_tid()
        payload = krpc.build_find_node(tid, self.nodeid, target)
        raw = self.transport.request(endpoint, payload)
        if raw is None:
            return None
        try:
            msg = krpc.parse_message(raw)
        except ValueError:
            return None
        if msg.kind is not krpc.MessageKind.RESPONSE or msg.transaction_id != tid:
            return None
        return msg

    def _ping(self, endpoint) -> bool:
        cached = self._ping_cache.get(endpoint)
        if cached is not None:
            return cached
        tid = self._next_tid()
        raw = self.transport.request(endpoint, krpc.build_ping(tid, self.nodeid))
        ok = False
        if raw is not None:
            try:
                msg = krpc.parse_message(raw)
                ok = msg.kind is krpc.MessageKind.RESPONSE and msg.transaction_id == tid
            except ValueError:
                ok = False
        self._ping_cache[endpoint] = ok
        return ok

    # -- per-peer job -----------------------------------------------------

    def _query_peer(self, endpoint: tuple[str, int]) -> _PeerResult:
        result = _PeerResult(endpoint, responded=False)
        seen: set[PeerIdentity] = set()
        internal_seen: set[PeerIdentity] = set()
        reporter_id: Optional[bytes] = None

        def run_batch(count: int) -> bool:
            """Issue `count` queries; True if any new internal peer appeared."""
            nonlocal reporter_id
            new_internal = False
            for _ in range(count):
                target = krpc.random_nodeid(self.rng)
                msg = self._find_node(endpoint, target)
                result.queries_sent += 1
                if msg is None:
                    continue
                result.responded = True
                rid = msg.body.get(b"id")
                if isinstance(rid, bytes) and len(rid) == krpc.NODEID_BYTES:
                    reporter_id = rid
                blob = msg.body.get(b"nodes", b"")
                if not isinstance(blob, bytes):
                    continue
                try:
                    nodes = krpc.decode_nodes(blob)
                except ValueError:
                    continue
                for node in nodes:
                    if node.port == 0:
                        continue
                    if is_forbidden(node.ip):
                        self.stats.skipped_forbidden += 1
                        continue
                    identity = PeerIdentity(node.ip, node.port, node.nodeid)
                    if identity in seen:
                        continue
                    seen.add(identity)
                    result.learned.append(identity)
                    if classify_reserved(node.ip) is not None and identity not in internal_seen:
                        internal_seen.add(identity)
                        new_internal = True
            return new_internal

        harvested = run_batch(QUERIES_PER_PEER)
        # leakage escalation: keep asking in batches of ten until a batch
        # yields nothing new from inside
        while harvested:
            result.escalated = True
            harvested = run_batch(ESCALATION_BATCH)

        if result.responded and reporter_id is not None:
            result.reporter = PeerIdentity(endpoint[0], endpoint[1], reporter_id)
        return result

    # -- main loop --------------------------------------------------------

    def crawl(self, bootstrap, budget: int) -> list[PeerRecord]:
        """Query up to `budget` peers starting from the bootstrap endpoints."""
        frontier: deque[tuple[str, int]] = deque(
            (ip, int(port)) for ip, port in bootstrap
        )
        scheduled: set[tuple[str, int]] = set(frontier)
        records: list[PeerRecord] = []
        emitted: set[tuple[PeerIdentity, PeerIdentity]] = set()

        def consume(result: _PeerResult) -> None:
            if not result.responded or result.reporter is None:
                self.stats.unresponsive += 1
                return
            self.stats.responsive += 1
            if result.escalated:
                self.stats.escalated_peers += 1
            for identity in result.learned:
                key = (result.reporter, identity)
                if key in emitted:
                    continue
                emitted.add(key)
                responded_ping = self._ping((identity.ip, identity.port))
                records.append(PeerRecord(
                    ts=self.transport.now(),
                    reporter=result.reporter,
                    reported=identity,
                    responded_ping=responded_ping,
                ))
                self.stats.records += 1
                if (
                    classify_reserved(identity.ip) is None
                    and (identity.ip, identity.port) not in scheduled
                ):
                    scheduled.add((identity.ip, identity.port))
                    frontier.append((identity.ip, identity.port))

        if self.concurrency == 1:
            while frontier and self.stats.attempted < budget:
                endpoint = frontier.popleft()
                self.stats.attempted += 1
                consume(self._query_peer(endpoint))
            return records

        pending = set()
        with ThreadPoolExecutor(max_workers=self.concurrency) as pool:
            while (frontier and self.stats.attempted < budget) or pending:
                while (
                    frontier
                    and self.stats.attempted < budget
                    and len(pending) < self.concurrency
                ):
                    endpoint = frontier.popleft()
                    self.stats.attempted += 1
                    pending.add(pool.submit(self._query_peer, endpoint))
                if not pending:
                    break
                done, pending = wait(pending, return_when=FIRST_COMPLETED)
                for future in done:
                    consume(future.result())
        return records


class LiveUdpTransport:
    """Query transport over a real UDP socket.

    One retransmit after 2 s, 5 s overall response timeout. Incoming ping
    queries from other nodes are answered (the crawler participates
    passively), everything else unsolicited is dropped.
    """

    def __init__(self, bind=("0.0.0.0", 0), nodeid: bytes = b"\x00" * 20):
        self.sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
        self.sock.bind(bind)
        self.nodeid = nodeid
        self._lock = threading.Lock()

    def close(self):
        self.sock.close()

    def now(self) -> float:
        return time.time()

    def request(self, endpoint, payload: bytes) -> Optional[bytes]:
        with self._lock:
            deadline = time.monotonic() + RESPONSE_TIMEOUT
            retransmit_at = time.monotonic() + RETRANSMIT_AFTER
            self.sock.sendto(payload, endpoint)
            while True:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return None
                self.sock.settimeout(min(remaining, max(retransmit_at - time.monotonic(), 0.05)))
                try:
                    data, addr = self.sock.recvfrom(65536)
                except socket.timeout:
                    if time.monotonic() >= retransmit_at and time.monotonic() < deadline:
                        self.sock.sendto(payload, endpoint)
                        retransmit_at = deadline + 1  # only one retransmit
                    continue
                if addr == endpoint:
                    return data
                self._maybe_answer_ping(data, addr)

    def _maybe_answer_ping(self, data: bytes, addr) -> None:
        try:
            msg = krpc.parse_message(data)
        except ValueError:
            return
        if msg.kind is krpc.MessageKind.QUERY and msg.method == "ping":
            self.sock.sendto(
                krpc.build_ping_response(msg.transaction_id, self.nodeid), addr
            )
