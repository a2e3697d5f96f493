"""Shared low-level helpers for the versioned binary artifact formats."""

from __future__ import annotations

import struct
from typing import BinaryIO

MAGIC = b"SGBF"


def write_uvarint(f: BinaryIO, value: int) -> None:
    if value < 0:
        raise ValueError("uvarint cannot encode negatives")
    while True:
        byte = value & 0x7F
        value >>= 7
        if value:
            f.write(bytes((byte | 0x80,)))
        else:
            f.write(bytes((byte,)))
            return


def read_uvarint(f: BinaryIO) -> int:
    shift = 0
    value = 0
    while True:
        b = f.read(1)
        if not b:
            raise EOFError("truncated varint")
        byte = b[0]
        value |= (byte & 0x7F) << shift
        if not byte & 0x80:
            return value
        shift += 7
        if shift > 63:
            raise ValueError("varint too long")


def write_f64(f: BinaryIO, value: float) -> None:
    f.write(struct.pack("<d", value))


def read_f64(f: BinaryIO) -> float:
    data = f.read(8)
    if len(data) != 8:
        raise EOFError("truncated f64")
    return struct.unpack("<d", data)[0]


def write_header(f: BinaryIO, kind: bytes, version: int, vocab_hash: bytes) -> None:
    """Magic, 4-byte artifact kind, version byte, 32-byte vocabulary hash."""
    if len(kind) != 4:
        raise ValueError("artifact kind must be 4 bytes")
    if len(vocab_hash) != 32:
        raise ValueError("vocabulary hash must be 32 bytes")
    f.write(MAGIC)
    f.write(kind)
    f.write(bytes((version,)))
    f.write(vocab_hash)


def read_header(f: BinaryIO, kind: bytes, version: int) -> bytes:
    """Validate the header and return the stored vocabulary hash."""
    magic = f.read(4)
    if magic != MAGIC:
        raise ValueError("not a subgram binary artifact")
    got_kind = f.read(4)
    if got_kind != kind:
        raise ValueError(f"artifact kind {got_kind!r}, expected {kind!r}")
    ver = f.read(1)
    if not ver or ver[0] != version:
        raise ValueError(f"unsupported {kind!r} version {ver!r}")
    vocab_hash = f.read(32)
    if len(vocab_hash) != 32:
        raise EOFError("truncated header")
    return vocab_hash
