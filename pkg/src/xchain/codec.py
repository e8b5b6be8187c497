"""Canonical binary and JSON encodings.

Every value is written as ``tag (1 byte) | length (4 bytes, big-endian) | body``.
Scalars have fixed bodies, sequences concatenate their encoded items, and
registered dataclasses concatenate their fields in declaration order.  The
format is self-delimiting, so ``decode(encode(x)) == x`` without a schema.
"""
from __future__ import annotations

import dataclasses
import hashlib
import struct

_REGISTRY: dict[bytes, type] = {}
_TAGS: dict[type, bytes] = {}


class CodecError(ValueError):
    pass


def register(tag: bytes):
    """Class decorator binding a frozen dataclass to a one-byte tag."""
    if len(tag) != 1 or tag in _REGISTRY or tag in b"inTFsbfl":
        raise CodecError(f"bad or reused tag {tag!r}")

    def wrap(cls):
        _REGISTRY[tag] = cls
        _TAGS[cls] = tag
        return cls

    return wrap


def sha256(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


def _frame(tag: bytes, body: bytes) -> bytes:
    return tag + struct.pack(">I", len(body)) + body


def encode(value) -> bytes:
    if value is None:
        return _frame(b"n", b"")
    if value is True:
        return _frame(b"T", b"")
    if value is False:
        return _frame(b"F", b"")
    if isinstance(value, int):
        return _frame(b"i", struct.pack(">q", value))
    if isinstance(value, float):
        return _frame(b"f", struct.pack(">d", value))
    if isinstance(value, str):
        return _frame(b"s", value.encode("utf-8"))
    if isinstance(value, (bytes, bytearray)):
        return _frame(b"b", bytes(value))
    if isinstance(value, (tuple, list)):
        return _frame(b"l", b"".join(encode(v) for v in value))
    tag = _TAGS.get(type(value))
    if tag is None:
        raise CodecError(f"no canonical encoding for {type(value).__name__}")
    body = b"".join(encode(getattr(value, f.name)) for f in dataclasses.fields(value))
    return _frame(tag, body)


def _decode_at(data: bytes, pos: int):
    if pos + 5 > len(data):
        raise CodecError("truncated frame header")
    tag = data[pos:pos + 1]
    (length,) = struct.unpack(">I", data[pos + 1:pos + 5])
    start, end = pos + 5, pos + 5 + length
    if end > len(data):
        raise CodecError("truncated frame body")
    body = data[start:end]
    if tag == b"n":
        return None, end
    if tag == b"T":
        return True, end
    if tag == b"F":
        return False, end
    if tag == b"i":
        return struct.unpack(">q", body)[0], end
    if tag == b"f":
        return struct.unpack(">d", body)[0], end
    if tag == b"s":
        return body.decode("utf-8"), end
    if tag == b"b":
        return body, end
    items = []
    cur = start
    while cur < end:
        item, cur = _decode_at(data, cur)
        items.append(item)
    if cur != end:
        raise CodecError("sequence overruns its frame")
    if tag == b"l":
        return tuple(items), end
    cls = _REGISTRY.get(tag)
    if cls is None:
        raise CodecError(f"unknown tag {tag!r}")
    names = [f.name for f in dataclasses.fields(cls)]
    if len(items) != len(names):
        raise CodecError(f"{cls.__name__}: expected {len(names)} fields, got {len(items)}")
    return cls(**dict(zip(names, items))), end


def decode(data: bytes):
    value, end = _decode_at(data, 0)
    if end != len(data):
        raise CodecError("trailing bytes")
    return value


def to_jsonable(value):
    """Plain JSON view: dataclass -> dict of its fields, bytes -> lowercase hex."""
    if isinstance(value, (bytes, bytearray)):
        return bytes(value).hex()
    if isinstance(value, (tuple, list)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return [to_jsonable(v) for v in sorted(value)]
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return {f.name: to_jsonable(getattr(value, f.name)) for f in dataclasses.fields(value)}
    return value
