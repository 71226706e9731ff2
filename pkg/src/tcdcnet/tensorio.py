"""Dense float32 tensors and the VTNS binary file format.

Tensors are plain C-contiguous numpy float32 arrays of rank 1 to 5.
Every array that crosses a module boundary goes through as_tensor so the
layout assumption (row-major, float32) holds everywhere.

VTNS layout: 4-byte magic "VTNS", version byte (=1), rank byte, then
rank little-endian u32 dims, then product(dims) little-endian float32
values. No padding, no trailer.
"""

import struct

import numpy as np

from .errors import (
    BadMagic,
    IoError,
    RankOutOfRange,
    ShapeMismatch,
    TruncatedPayload,
    ZeroDim,
)

MAGIC = b"VTNS"
VERSION = 1
MAX_RANK = 5


def _check_dims(dims):
    if any(d <= 0 for d in dims):
        raise ZeroDim(f"dims must be positive, got {dims}")
    if not 1 <= len(dims) <= MAX_RANK:
        raise RankOutOfRange(f"rank must be 1..{MAX_RANK}, got {len(dims)}")


def tensor_new(dims, fill=0.0):
    """Fresh tensor of the given dims, every element set to fill."""
    dims = tuple(int(d) for d in dims)
    _check_dims(dims)
    return np.full(dims, fill, dtype=np.float32)


def as_tensor(a):
    """Coerce to a C-contiguous float32 array, validating rank and dims."""
    out = np.ascontiguousarray(a, dtype=np.float32)
    _check_dims(out.shape)
    return out


def tensor_map2(a, b, op):
    """Elementwise combine: op in {add, sub, mul, scale}.

    scale takes b as a rank-1 single-element tensor (the scalar).
    """
    a = as_tensor(a)
    b = as_tensor(b)
    if op == "scale":
        if b.shape != (1,):
            raise ShapeMismatch(f"scale expects b of shape (1,), got {b.shape}")
        return (a * b[0]).astype(np.float32)
    if a.shape != b.shape:
        raise ShapeMismatch(f"{a.shape} vs {b.shape}")
    if op == "add":
        return a + b
    if op == "sub":
        return a - b
    if op == "mul":
        return a * b
    raise ShapeMismatch(f"unknown op {op!r}")


def tensor_save(t, path):
    t = as_tensor(t)
    header = MAGIC + struct.pack("<BB", VERSION, t.ndim)
    header += struct.pack(f"<{t.ndim}I", *t.shape)
    try:
        with open(path, "wb") as fh:
            fh.write(header)
            fh.write(t.astype("<f4").tobytes())
    except OSError as exc:
        raise IoError(str(exc)) from exc


def tensor_load(path):
    try:
        with open(path, "rb") as fh:
            blob = fh.read()
    except OSError as exc:
        raise IoError(str(exc)) from exc
    if len(blob) < 6 or blob[:4] != MAGIC:
        raise BadMagic(f"{path}: not a VTNS file")
    version, rank = blob[4], blob[5]
    if version != VERSION:
        raise BadMagic(f"{path}: unsupported version {version}")
    if not 1 <= rank <= MAX_RANK:
        raise RankOutOfRange(f"{path}: rank {rank}")
    header_end = 6 + 4 * rank
    if len(blob) < header_end:
        raise TruncatedPayload(f"{path}: header cut short")
    dims = struct.unpack(f"<{rank}I", blob[6:header_end])
    _check_dims(dims)
    count = int(np.prod(dims))
    payload = blob[header_end:]
    if len(payload) < 4 * count:
        raise TruncatedPayload(
            f"{path}: expected {4 * count} payload bytes, got {len(payload)}"
        )
    data = np.frombuffer(payload[: 4 * count], dtype="<f4")
    return np.ascontiguousarray(data.reshape(dims)).astype(np.float32)
