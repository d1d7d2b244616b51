from .bencode import BencodeError, decode as bencode_decode, encode as bencode_encode
from .krpc import (
    CompactNodeInfo,
    KrpcMessage,
    MessageKind,
    decode_nodes,
    encode_nodes,
    random_nodeid,
    xor_distance,
)
from .records import PeerIdentity, PeerRecord, read_records, write_records
from .crawl import Crawler, CrawlStats, LiveUdpTransport

__all__ = [
    "BencodeError",
    "CompactNodeInfo",
    "Crawler",
    "CrawlStats",
    "KrpcMessage",
    "LiveUdpTransport",
    "MessageKind",
    "PeerIdentity",
    "PeerRecord",
    "bencode_decode",
    "bencode_encode",
    "decode_nodes",
    "encode_nodes",
    "random_nodeid",
    "read_records",
    "write_records",
    "xor_distance",
]
