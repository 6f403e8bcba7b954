"""NNT1 binary container: named little-endian arrays behind a JSON header.

Layout: magic ``NNT1``, a 32-bit little-endian header length, the canonical
JSON header (version, free-form meta, ordered array descriptors with byte
offsets), then the contiguous array payloads. The same container stores
models, optimizer state, and training datasets; save -> load -> save is
byte-identical.
"""
from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

MAGIC = b"NNT1"
VERSION = 1

_DTYPES = {"f64": "<f8", "f32": "<f4", "i64": "<i8"}
_DTYPE_NAMES = {np.dtype("<f8"): "f64", np.dtype("<f4"): "f32", np.dtype("<i8"): "i64"}


class ContainerError(RuntimeError):
    pass


class CorruptFileError(ContainerError):
    """File is truncated or structurally invalid."""


class VersionMismatchError(ContainerError):
    """Magic or version is not the supported NNT1 layout."""


def save_arrays(path, arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    """Write named arrays in insertion order with optional JSON metadata."""
    descriptors = []
    payloads = []
    offset = 0
    for name, value in arrays.items():
        value = np.ascontiguousarray(value)
        dtype = np.dtype(value.dtype).newbyteorder("<")
        if dtype not in _DTYPE_NAMES:
            dtype = np.dtype("<f8")
        data = value.astype(dtype, copy=False).tobytes()
        descriptors.append({
            "name": name,
            "shape": list(value.shape),
            "dtype": _DTYPE_NAMES[dtype],
            "offset": offset,
        })
        payloads.append(data)
        offset += len(data)
    header = {"version": VERSION, "meta": meta or {}, "arrays": descriptors}
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode()
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", len(header_bytes)))
        fh.write(header_bytes)
        for data in payloads:
            fh.write(data)


def load_arrays(path) -> tuple[dict[str, np.ndarray], dict]:
    """Read back (arrays, meta); arrays preserve their saved order."""
    raw = Path(path).read_bytes()
    if len(raw) < 8:
        raise CorruptFileError(f"{path}: too short to be an NNT1 container")
    if raw[:4] != MAGIC:
        raise VersionMismatchError(f"{path}: bad magic {raw[:4]!r}, expected {MAGIC!r}")
    header_len = struct.unpack("<I", raw[4:8])[0]
    if len(raw) < 8 + header_len:
        raise CorruptFileError(f"{path}: truncated header")
    try:
        header = json.loads(raw[8:8 + header_len])
    except json.JSONDecodeError as exc:
        raise CorruptFileError(f"{path}: invalid header JSON") from exc
    if header.get("version") != VERSION:
        raise VersionMismatchError(
            f"{path}: container version {header.get('version')!r}, expected {VERSION}")
    payload = raw[8 + header_len:]
    arrays: dict[str, np.ndarray] = {}
    for desc in header["arrays"]:
        dtype = np.dtype(_DTYPES[desc["dtype"]])
        shape = tuple(desc["shape"])
        n_bytes = dtype.itemsize * int(np.prod(shape, dtype=np.int64)) if shape else dtype.itemsize
        start = desc["offset"]
        if start + n_bytes > len(payload):
            raise CorruptFileError(f"{path}: truncated payload for array {desc['name']!r}")
        arrays[desc["name"]] = np.frombuffer(
            payload[start:start + n_bytes], dtype=dtype).reshape(shape).copy()
    return arrays, header.get("meta", {})
