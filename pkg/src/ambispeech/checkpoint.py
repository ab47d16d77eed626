"""Flat binary parameter checkpoints.

Layout: magic b"AMBI1", u32 entry count, then per entry a u16 path length,
the UTF-8 path, u8 ndim, u32 per dimension, and the float64 payload.
All integers and floats are little-endian. Writes go through a temp file
plus atomic rename so readers never observe a partial checkpoint.
"""

from __future__ import annotations

import os
import struct
import tempfile

import numpy as np

from .errors import DataError

MAGIC = b"AMBI1"


def save_params(path: str | os.PathLike, params: dict[str, np.ndarray]) -> None:
    """Write a name->array mapping; insertion order is preserved."""
    blob = bytearray()
    blob += MAGIC
    blob += struct.pack("<I", len(params))
    for name, arr in params.items():
        a = np.ascontiguousarray(arr, dtype="<f8")
        encoded = name.encode("utf-8")
        if len(encoded) > 0xFFFF:
            raise DataError(f"parameter path too long: {name[:50]}...")
        blob += struct.pack("<H", len(encoded))
        blob += encoded
        blob += struct.pack("<B", a.ndim)
        for d in a.shape:
            blob += struct.pack("<I", d)
        blob += a.tobytes()
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(bytes(blob))
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_params(path: str | os.PathLike) -> dict[str, np.ndarray]:
    """Read a checkpoint back into {path: float64 array}."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc}") from exc
    if raw[: len(MAGIC)] != MAGIC:
        raise DataError(f"{path} is not a parameter checkpoint (bad magic)")
    off = len(MAGIC)

    def take(fmt: str) -> tuple:
        nonlocal off
        size = struct.calcsize(fmt)
        if off + size > len(raw):
            raise DataError(f"{path} is truncated")
        vals = struct.unpack_from(fmt, raw, off)
        off += size
        return vals

    (count,) = take("<I")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = take("<H")
        if off + name_len > len(raw):
            raise DataError(f"{path} is truncated")
        name = raw[off : off + name_len].decode("utf-8")
        off += name_len
        (ndim,) = take("<B")
        shape = tuple(take(f"<{ndim}I")) if ndim else ()
        n = int(np.prod(shape)) if shape else 1
        nbytes = n * 8
        if off + nbytes > len(raw):
            raise DataError(f"{path} is truncated")
        arr = np.frombuffer(raw, dtype="<f8", count=n, offset=off).reshape(shape)
        off += nbytes
        out[name] = arr.astype(np.float64)  # writable copy in native order
    if off != len(raw):
        raise DataError(f"{path} has {len(raw) - off} trailing bytes")
    return out
