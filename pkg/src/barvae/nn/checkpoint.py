"""Binary checkpoint container.

Layout (all integers little-endian):

    magic   4 bytes  b"BVC1"
    version u32      currently 1
    meta    u64 length + UTF-8 JSON object (arbitrary run metadata)
    count   u32      number of named arrays
    table   per array: u16 name length, name UTF-8,
            u8 dtype code (1=float32, 2=float64, 3=int64),
            u8 ndim, u32 per dimension
    data    raw C-order array bytes, concatenated in table order

Arrays are stored sorted by name so equal contents always produce equal
bytes. See docs/checkpoint_format.md for the worked layout.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"BVC1"
VERSION = 1

_DTYPE_CODES = {
    np.dtype(np.float32): 1,
    np.dtype(np.float64): 2,
    np.dtype(np.int64): 3,
}
_CODE_DTYPES = {v: k for k, v in _DTYPE_CODES.items()}


class CheckpointError(Exception):
    """Malformed checkpoint file."""


def save_arrays(path: str | Path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    names = sorted(arrays)
    meta_bytes = json.dumps(meta or {}, sort_keys=True).encode("utf-8")
    parts = [MAGIC, struct.pack("<I", VERSION), struct.pack("<Q", len(meta_bytes)), meta_bytes]
    parts.append(struct.pack("<I", len(names)))
    normalized: dict[str, np.ndarray] = {}
    for name in names:
        arr = np.asarray(arrays[name])
        # ascontiguousarray would promote 0-d to 1-d; only call it when needed.
        if not arr.flags.c_contiguous:
            arr = np.ascontiguousarray(arr)
        if arr.dtype.byteorder == ">":
            arr = arr.astype(arr.dtype.newbyteorder("<"))
        if arr.dtype not in _DTYPE_CODES:
            raise CheckpointError(f"unsupported dtype {arr.dtype} for {name!r}")
        normalized[name] = arr
        nb = name.encode("utf-8")
        parts.append(struct.pack("<H", len(nb)))
        parts.append(nb)
        parts.append(struct.pack("<BB", _DTYPE_CODES[arr.dtype], arr.ndim))
        parts.append(struct.pack(f"<{arr.ndim}I", *arr.shape))
    for name in names:
        parts.append(normalized[name].tobytes())
    tmp = Path(path).with_suffix(Path(path).suffix + ".tmp")
    tmp.write_bytes(b"".join(parts))
    tmp.replace(path)


def load_arrays(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    buf = Path(path).read_bytes()
    pos = 0

    def take(n: int, what: str) -> bytes:
        nonlocal pos
        if pos + n > len(buf):
            raise CheckpointError(f"truncated checkpoint: needed {n} bytes for {what} at offset {pos}")
        out = buf[pos : pos + n]
        pos += n
        return out

    if take(4, "magic") != MAGIC:
        raise CheckpointError("bad magic: not a checkpoint file")
    (version,) = struct.unpack("<I", take(4, "version"))
    if version != VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    (meta_len,) = struct.unpack("<Q", take(8, "meta length"))
    meta = json.loads(take(meta_len, "metadata").decode("utf-8"))
    (count,) = struct.unpack("<I", take(4, "entry count"))
    entries = []
    for _ in range(count):
        (name_len,) = struct.unpack("<H", take(2, "name length"))
        name = take(name_len, "name").decode("utf-8")
        code, ndim = struct.unpack("<BB", take(2, "dtype/ndim"))
        if code not in _CODE_DTYPES:
            raise CheckpointError(f"unknown dtype code {code} for {name!r}")
        shape = struct.unpack(f"<{ndim}I", take(4 * ndim, "shape"))
        entries.append((name, _CODE_DTYPES[code], shape))
    arrays: dict[str, np.ndarray] = {}
    for name, dtype, shape in entries:
        n_bytes = int(np.prod(shape, dtype=np.int64)) * dtype.itemsize
        raw = take(n_bytes, f"data for {name!r}")
        arrays[name] = np.frombuffer(raw, dtype=dtype).reshape(shape).copy()
    if pos != len(buf):
        raise CheckpointError(f"{len(buf) - pos} trailing bytes after checkpoint data")
    return arrays, meta
