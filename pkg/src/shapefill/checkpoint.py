"""Bit-exact binary checkpoints for named float32 parameter arrays.

Layout: magic b"RLGN1\\n", then a u32-LE entry count, then per entry a
u16-LE name length, the UTF-8 name, a u8 rank, rank u32-LE dims, and the
row-major float32-LE payload.
"""

from __future__ import annotations

import struct

import numpy as np

MAGIC_PREFIX = b"RLGN"
VERSION = b"1"
MAGIC = MAGIC_PREFIX + VERSION + b"\n"


class CheckpointError(ValueError):
    pass


class CheckpointMagicError(CheckpointError):
    pass


class CheckpointVersionError(CheckpointError):
    pass


class CheckpointTruncatedError(CheckpointError):
    pass


def dump_arrays(entries) -> bytes:
    """Serialize {name: array} (or (name, array) pairs) to checkpoint bytes."""
    if hasattr(entries, "items"):
        entries = entries.items()
    entries = list(entries)
    parts = [MAGIC, struct.pack("<I", len(entries))]
    for name, arr in entries:
        arr = np.asarray(arr, dtype="<f4")  # tobytes() below emits C order
        name_b = name.encode("utf-8")
        if len(name_b) > 0xFFFF:
            raise CheckpointError(f"parameter name too long: {name!r}")
        if arr.ndim > 0xFF:
            raise CheckpointError(f"rank {arr.ndim} exceeds format limit")
        parts.append(struct.pack("<H", len(name_b)))
        parts.append(name_b)
        parts.append(struct.pack("<B", arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
        parts.append(arr.tobytes())
    return b"".join(parts)


def parse_arrays(data: bytes) -> dict:
    """Parse checkpoint bytes back into an ordered {name: float32 array} dict."""
    if len(data) < len(MAGIC):
        raise CheckpointTruncatedError(f"checkpoint shorter than magic ({len(data)} bytes)")
    if data[:4] != MAGIC_PREFIX:
        raise CheckpointMagicError(f"bad magic {data[:4]!r}, expected {MAGIC_PREFIX!r}")
    if data[4:6] != VERSION + b"\n":
        raise CheckpointVersionError(
            f"unsupported checkpoint version {data[4:5]!r}, expected {VERSION!r}"
        )
    pos = len(MAGIC)

    def take(n, what):
        nonlocal pos
        if pos + n > len(data):
            raise CheckpointTruncatedError(
                f"truncated checkpoint: needed {n} bytes for {what} at offset {pos}"
            )
        chunk = data[pos:pos + n]
        pos += n
        return chunk

    (count,) = struct.unpack("<I", take(4, "entry count"))
    out = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = take(name_len, "name").decode("utf-8")
        (rank,) = struct.unpack("<B", take(1, "rank"))
        shape = struct.unpack(f"<{rank}I", take(4 * rank, "dims"))
        n_elem = int(np.prod(shape, dtype=np.int64)) if rank else 1
        payload = take(4 * n_elem, f"payload of {name!r}")
        out[name] = np.frombuffer(payload, dtype="<f4").reshape(shape).copy()
    if pos != len(data):
        raise CheckpointError(f"{len(data) - pos} trailing bytes after last entry")
    return out


def save_checkpoint(path, entries) -> None:
    with open(path, "wb") as fh:
        fh.write(dump_arrays(entries))


def load_checkpoint(path) -> dict:
    with open(path, "rb") as fh:
        return parse_arrays(fh.read())
