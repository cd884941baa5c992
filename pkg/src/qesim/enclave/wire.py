"""Wire records and canonical byte encodings.

A record is one kind byte, a 4-byte big-endian payload length, then the
payload.  Payloads are sequences of length-prefixed fields:

    keyex-request     (0x01)  g^a
    keyex-response    (0x02)  eid | g^b | attestation signature
    compute-request   (0x03)  ct
    compute-response  (0x04)  ct_out

Group elements are fixed-width big-endian integers.
"""

from __future__ import annotations

import struct
from enum import IntEnum
from typing import Any


class Kind(IntEnum):
    KEYEX_REQUEST = 0x01
    KEYEX_RESPONSE = 0x02
    COMPUTE_REQUEST = 0x03
    COMPUTE_RESPONSE = 0x04

    @property
    def label(self) -> str:
        return self.name.lower().replace("_", "-")


class WireError(ValueError):
    pass


def frame(kind: Kind, payload: bytes) -> bytes:
    return bytes([kind]) + struct.pack(">I", len(payload)) + payload


def unframe(data: bytes) -> tuple[Kind, bytes]:
    if len(data) < 5:
        raise WireError("record shorter than its header")
    try:
        kind = Kind(data[0])
    except ValueError:
        raise WireError(f"unknown record kind 0x{data[0]:02x}") from None
    (n,) = struct.unpack(">I", data[1:5])
    if len(data) != 5 + n:
        raise WireError(f"declared length {n} does not match {len(data) - 5}")
    return kind, data[5:]


def pack_fields(*fields: bytes) -> bytes:
    return b"".join(struct.pack(">I", len(f)) + f for f in fields)


def unpack_fields(data: bytes, count: int) -> list[bytes]:
    out, pos = [], 0
    for _ in range(count):
        if pos + 4 > len(data):
            raise WireError("truncated field header")
        (n,) = struct.unpack(">I", data[pos:pos + 4])
        pos += 4
        if pos + n > len(data):
            raise WireError("truncated field")
        out.append(data[pos:pos + n])
        pos += n
    if pos != len(data):
        raise WireError("trailing bytes after fields")
    return out


def encode_value(value: Any) -> bytes:
    """Canonical, injective encoding of nested ints/bytes/str/tuples for signing."""
    if isinstance(value, bool):
        value = int(value)
    if isinstance(value, int):
        if value < 0:
            raise ValueError("negative integers are not encoded")
        return b"i" + pack_fields(value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big"))
    if isinstance(value, (bytes, bytearray)):
        return b"b" + pack_fields(bytes(value))
    if isinstance(value, str):
        return b"s" + pack_fields(value.encode())
    if isinstance(value, (tuple, list)):
        return b"t" + pack_fields(struct.pack(">I", len(value)), *(encode_value(v) for v in value))
    raise TypeError(f"cannot encode {type(value).__name__}")
