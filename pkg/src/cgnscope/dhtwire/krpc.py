"""KRPC messages (ping / find_node subset) and compact node encoding."""

from __future__ import annotations

import enum
import random
import socket
import struct
from dataclasses import dataclass
from typing import Optional

from . import bencode

NODEID_BYTES = 20
COMPACT_NODE_BYTES = 26  # 20-byte nodeid + 4-byte IPv4 + 2-byte port


def random_nodeid(rng: random.Random) -> bytes:
    """Uniform 160-bit identifier."""
    return rng.getrandbits(160).to_bytes(NODEID_BYTES, "big")


def xor_distance(a: bytes, b: bytes) -> int:
    """Kademlia closeness metric between two 160-bit identifiers."""
    if len(a) != NODEID_BYTES or len(b) != NODEID_BYTES:
        raise ValueError("nodeids must be 20 bytes")
    return int.from_bytes(a, "big") ^ int.from_bytes(b, "big")


@dataclass(frozen=True)
class CompactNodeInfo:
    nodeid: bytes
    ip: str
    port: int


def encode_nodes(nodes) -> bytes:
    out = bytearray()
    for node in nodes:
        if len(node.nodeid) != NODEID_BYTES:
            raise ValueError("nodeid must be 20 bytes")
        out += node.nodeid
        out += socket.inet_aton(node.ip)
        out += struct.pack(">H", node.port)
    return bytes(out)


def decode_nodes(data: bytes) -> list[CompactNodeInfo]:
    """Decode a concatenation of 26-byte node entries.

    Anything that is not a whole number of IPv4 entries (including the
    38-byte IPv6 form) is rejected.
    """
    if len(data) % COMPACT_NODE_BYTES:
        raise ValueError(
            f"compact node blob of {len(data)} bytes is not a multiple of 26"
        )
    nodes = []
    for off in range(0, len(data), COMPACT_NODE_BYTES):
        nodeid = data[off:off + 20]
        ip = socket.inet_ntoa(data[off + 20:off + 24])
        (port,) = struct.unpack(">H", data[off + 24:off + 26])
        nodes.append(CompactNodeInfo(nodeid, ip, port))
    return nodes


class MessageKind(enum.Enum):
    QUERY = "q"
    RESPONSE = "r"
    ERROR = "e"


@dataclass(frozen=True)
class KrpcMessage:
    kind: MessageKind
    transaction_id: bytes
    method: Optional[str] = None  # for queries: "ping" or "find_node"
    body: Optional[dict] = None   # "a" tree for queries, "r" tree for responses
    error: Optional[list] = None


def build_ping(transaction_id: bytes, nodeid: bytes) -> bytes:
    return bencode.encode({
        b"t": transaction_id, b"y": b"q", b"q": b"ping", b"a": {b"id": nodeid},
    })


def build_find_node(transaction_id: bytes, nodeid: bytes, target: bytes) -> bytes:
    return bencode.encode({
        b"t": transaction_id, b"y": b"q", b"q": b"find_node",
        b"a": {b"id": nodeid, b"target": target},
    })


def build_ping_response(transaction_id: bytes, nodeid: bytes) -> bytes:
    return bencode.encode({b"t": transaction_id, b"y": b"r", b"r": {b"id": nodeid}})


def build_find_node_response(transaction_id: bytes, nodeid: bytes, nodes: bytes) -> bytes:
    return bencode.encode({
        b"t": transaction_id, b"y": b"r", b"r": {b"id": nodeid, b"nodes": nodes},
    })


def parse_message(data: bytes) -> KrpcMessage:
    tree = bencode.decode(data)
    if not isinstance(tree, dict):
        raise ValueError("KRPC message is not a dictionary")
    tid = tree.get(b"t")
    y = tree.get(b"y")
    if not isinstance(tid, bytes) or not isinstance(y, bytes):
        raise ValueError("KRPC message missing t/y")
    if y == b"q":
        method = tree.get(b"q")
        args = tree.get(b"a")
        if not isinstance(method, bytes) or not isinstance(args, dict):
            raise ValueError("malformed query")
        return KrpcMessage(MessageKind.QUERY, tid, method.decode("ascii"), args)
    if y == b"r":
        body = tree.get(b"r")
        if not isinstance(body, dict):
            raise ValueError("malformed response")
        return KrpcMessage(MessageKind.RESPONSE, tid, None, body)
    if y == b"e":
        err = tree.get(b"e")
        if not isinstance(err, list):
            raise ValueError("malformed error")
        return KrpcMessage(MessageKind.ERROR, tid, None, None, err)
    raise ValueError(f"unknown message kind {y!r}")
