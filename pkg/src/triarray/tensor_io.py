"""Integer tensor file format.

Binary layout: a 16-byte little-endian header followed by raw int32 values
in C order.

    offset  size  field
    0       4     magic b"ITF1"
    4       1     element bit width B
    5       1     flags (bit0: values are signed)
    6       1     ndim (1..4)
    7       1     reserved (0)
    8       8     dims, 4 x uint16 (unused trailing dims are 1)

A JSON debug form ("{bits, signed, shape, values}") is provided for small
tensors and golden files kept under version control.
"""

from __future__ import annotations

import json
import struct

import numpy as np

from .errors import ConfigError

MAGIC = b"ITF1"
_HEADER = struct.Struct("<4sBBBB4H")

__all__ = ["write_tensor", "read_tensor", "tensor_to_json", "tensor_from_json"]


def _check(values: np.ndarray, bits: int, signed: bool) -> np.ndarray:
    v = np.ascontiguousarray(values, dtype=np.int64)
    if v.ndim < 1 or v.ndim > 4:
        raise ConfigError(f"tensor rank {v.ndim} not supported (1..4)")
    if any(d < 1 or d > 0xFFFF for d in v.shape):
        raise ConfigError(f"tensor dims {v.shape} out of uint16 range")
    lo = -(1 << (bits - 1)) if signed else 0
    hi = (1 << (bits - 1)) - 1 if signed else (1 << bits) - 1
    if v.size and (v.min() < lo or v.max() > hi):
        raise ConfigError(f"value out of {'signed' if signed else 'unsigned'} {bits}-bit range")
    return v


def write_tensor(path, values, bits: int, signed: bool) -> None:
    v = _check(np.asarray(values), bits, signed)
    dims = list(v.shape) + [1] * (4 - v.ndim)
    header = _HEADER.pack(MAGIC, bits, 1 if signed else 0, v.ndim, 0, *dims)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(v.astype("<i4").tobytes())


def read_tensor(path) -> tuple[np.ndarray, int, bool]:
    """Returns (values int64, bits, signed)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < _HEADER.size:
        raise ConfigError(f"{path}: truncated tensor file")
    magic, bits, flags, ndim, _res, d0, d1, d2, d3 = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise ConfigError(f"{path}: bad magic {magic!r}")
    if not 1 <= ndim <= 4:
        raise ConfigError(f"{path}: bad ndim {ndim}")
    shape = (d0, d1, d2, d3)[:ndim]
    count = int(np.prod(shape))
    body = raw[_HEADER.size:]
    if len(body) != 4 * count:
        raise ConfigError(f"{path}: payload {len(body)} bytes, expected {4 * count}")
    values = np.frombuffer(body, dtype="<i4").astype(np.int64).reshape(shape)
    signed = bool(flags & 1)
    return _check(values, bits, signed), bits, signed


def tensor_to_json(values, bits: int, signed: bool) -> str:
    v = _check(np.asarray(values), bits, signed)
    return json.dumps(
        {"bits": bits, "signed": signed, "shape": list(v.shape), "values": v.tolist()},
        sort_keys=True,
    )


def tensor_from_json(text: str) -> tuple[np.ndarray, int, bool]:
    data = json.loads(text)
    try:
        values = np.asarray(data["values"], dtype=np.int64).reshape(data["shape"])
        bits, signed = int(data["bits"]), bool(data["signed"])
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed tensor JSON: {exc}") from exc
    return _check(values, bits, signed), bits, signed
