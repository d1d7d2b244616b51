"""Bit-exact bencode codec.

Values are bytes, int, list, or dict with byte-string keys. Encoding is
canonical: dictionary keys are serialized in lexicographic byte order, so
encode(decode(data)) == data for any well-formed input that already obeys
the spec's key ordering, and decode(encode(value)) == value always.
"""

from __future__ import annotations

from typing import Union

Value = Union[bytes, int, list, dict]


class BencodeError(ValueError):
    """Malformed bencode input; `offset` is the byte position of the fault."""

    def __init__(self, offset: int, message: str):
        super().__init__(f"offset {offset}: {message}")
        self.offset = offset


def encode(value: Value) -> bytes:
    out: list[bytes] = []
    _encode(value, out)
    return b"".join(out)


def _encode(value: Value, out: list[bytes]) -> None:
    if isinstance(value, bool):
        raise TypeError("bool is not a bencode type")
    if isinstance(value, bytes):
        out.append(b"%d:%s" % (len(value), value))
    elif isinstance(value, int):
        out.append(b"i%de" % value)
    elif isinstance(value, list):
        out.append(b"l")
        for item in value:
            _encode(item, out)
        out.append(b"e")
    elif isinstance(value, dict):
        out.append(b"d")
        for key in sorted(value):
            if not isinstance(key, bytes):
                raise TypeError(f"dict keys must be bytes, got {type(key).__name__}")
            _encode(key, out)
            _encode(value[key], out)
        out.append(b"e")
    else:
        raise TypeError(f"cannot bencode {type(value).__name__}")


def decode(data: bytes) -> Value:
    """Decode a single bencoded value; trailing bytes are an error."""
    value, pos = _decode(data, 0)
    if pos != len(data):
        raise BencodeError(pos, "trailing data after value")
    return value


def _decode(data: bytes, pos: int) -> tuple[Value, int]:
    if pos >= len(data):
        raise BencodeError(pos, "truncated value")
    lead = data[pos:pos + 1]
    if lead == b"i":
        end = data.find(b"e", pos + 1)
        if end < 0:
            raise BencodeError(pos, "unterminated integer")
        digits = data[pos + 1:end]
        if not _valid_int(digits):
            raise BencodeError(pos + 1, f"bad integer literal {digits!r}")
        return int(digits), end + 1
    if lead == b"l":
        items = []
        pos += 1
        while True:
            if pos >= len(data):
                raise BencodeError(pos, "unterminated list")
            if data[pos:pos + 1] == b"e":
                return items, pos + 1
            item, pos = _decode(data, pos)
            items.append(item)
    if lead == b"d":
        tree: dict[bytes, Value] = {}
        pos += 1
        prev_key = None
        while True:
            if pos >= len(data):
                raise BencodeError(pos, "unterminated dictionary")
            if data[pos:pos + 1] == b"e":
                return tree, pos + 1
            key, pos = _decode(data, pos)
            if not isinstance(key, bytes):
                raise BencodeError(pos, "dictionary key is not a byte string")
            if prev_key is not None and key <= prev_key:
                raise BencodeError(pos, f"dictionary keys out of order at {key!r}")
            prev_key = key
            value, pos = _decode(data, pos)
            tree[key] = value
    if lead.isdigit():
        colon = data.find(b":", pos)
        if colon < 0:
            raise BencodeError(pos, "unterminated string length")
        length_digits = data[pos:colon]
        if not length_digits.isdigit() or (
            length_digits.startswith(b"0") and len(length_digits) > 1
        ):
            raise BencodeError(pos, f"bad string length {length_digits!r}")
        length = int(length_digits)
        start = colon + 1
        if start + length > len(data):
            raise BencodeError(start, "string extends past end of input")
        return data[start:start + length], start + length
    raise BencodeError(pos, f"unexpected byte {lead!r}")


def _valid_int(digits: bytes) -> bool:
    if digits in (b"", b"-"):
        return False
    body = digits[1:] if digits.startswith(b"-") else digits
    if not body.isdigit():
        return False
    # no leading zeros, and -0 is invalid
    if body.startswith(b"0") and (len(body) > 1 or digits.startswith(b"-")):
        return False
    return True
