"""ATRK dense tensor files.

Layout (little-endian)::

    offset  size  field
    0       4     magic b"ATRK"
    4       2     u16 version (1)
    6       1     u8 kind: 1 heatmap, 2 size map, 3 displacement
    7       1     u8 reserved (0)
    8       4     u32 rows   (H / R)
    12      4     u32 cols   (W / R)
    16      4     u32 channels
    20      4     u32 downsample R
    24      ...   rows * cols * channels float32, row-major
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..core import DisplacementField, GridSpec, Heatmap, SizeMap
from ..exceptions import (
    BadMagicError,
    NaNPayloadError,
    TensorFileError,
    TruncatedPayloadError,
    VersionMismatchError,
)

__all__ = ["MAGIC", "VERSION", "read_tensor_file", "write_tensor_file", "load_tensor", "save_tensor"]

MAGIC = b"ATRK"
VERSION = 1
_HEADER = struct.Struct("<4sHBB4I")
_KINDS = {Heatmap: 1, SizeMap: 2, DisplacementField: 3}
_CLASSES = {v: k for k, v in _KINDS.items()}


def write_tensor_file(tensor: Heatmap | SizeMap | DisplacementField) -> bytes:
    kind = _KINDS.get(type(tensor))
    if kind is None:
        raise TypeError(f"cannot serialize {type(tensor).__name__}")
    rows, cols, channels = tensor.values.shape
    header = _HEADER.pack(MAGIC, VERSION, kind, 0, rows, cols, channels, tensor.grid.downsample)
    return header + np.ascontiguousarray(tensor.values, dtype="<f4").tobytes()


def read_tensor_file(data: bytes) -> Heatmap | SizeMap | DisplacementField:
    data = bytes(data)
    if len(data) < 4 or data[:4] != MAGIC:
        raise BadMagicError(f"bad magic {data[:4]!r}, expected {MAGIC!r}")
    if len(data) < _HEADER.size:
        raise TruncatedPayloadError(f"header needs {_HEADER.size} bytes, got {len(data)}")
    _, version, kind, _, rows, cols, channels, downsample = _HEADER.unpack_from(data)
    if version != VERSION:
        raise VersionMismatchError(f"unsupported ATRK version {version}, expected {VERSION}")
    cls = _CLASSES.get(kind)
    if cls is None:
        raise TensorFileError(f"unknown tensor kind {kind}")
    if cls is not Heatmap and channels != 2:
        raise TensorFileError(f"{cls.__name__} must have 2 channels, header says {channels}")
    if rows == 0 or cols == 0 or channels == 0 or downsample == 0:
        raise TensorFileError("header declares an empty tensor")

    expected = rows * cols * channels * 4
    payload = data[_HEADER.size:]
    if len(payload) < expected:
        raise TruncatedPayloadError(f"payload has {len(payload)} bytes, header declares {expected}")
    if len(payload) > expected:
        raise TensorFileError(f"{len(payload) - expected} trailing bytes after payload")
    values = np.frombuffer(payload, dtype="<f4").reshape(rows, cols, channels)
    if not np.all(np.isfinite(values)):
        raise NaNPayloadError("payload contains NaN or infinite values")

    classes = channels if cls is Heatmap else 1
    grid = GridSpec(cols * downsample, rows * downsample, downsample, classes)
    return cls(grid, values.astype(np.float32))


def save_tensor(path, tensor) -> None:
    Path(path).write_bytes(write_tensor_file(tensor))


def load_tensor(path):
    return read_tensor_file(Path(path).read_bytes())
