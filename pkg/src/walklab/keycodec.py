"""Compact deterministic byte encodings for canonical element keys.

Keys use little-endian varints with zigzag encoding for signed values, so
equal integer sequences always serialize to identical byte strings.
"""

from __future__ import annotations


def zigzag(n: int) -> int:
    return (n << 1) ^ (n >> 63) if n >= 0 else ((-n) << 1) - 1


def _zigzag(n: int) -> int:
    # portable zigzag for arbitrary python ints
    return n << 1 if n >= 0 else ((-n) << 1) - 1


def encode_uvarint(n: int, out: bytearray) -> None:
    if n < 0:
        raise ValueError("uvarint requires n >= 0")
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return


def encode_ints(values) -> bytes:
    """Encode a sequence of signed ints as zigzag varints."""
    out = bytearray()
    for v in values:
        encode_uvarint(_zigzag(int(v)), out)
    return bytes(out)


def decode_ints(data: bytes) -> list[int]:
    out = []
    acc = 0
    shift = 0
    for b in data:
        acc |= (b & 0x7F) << shift
        if b & 0x80:
            shift += 7
        else:
            out.append((acc >> 1) if not (acc & 1) else -((acc + 1) >> 1))
            acc = 0
            shift = 0
    if shift:
        raise ValueError("truncated varint stream")
    return out
