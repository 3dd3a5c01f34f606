"""Binary weight files.

Layout (little-endian)::

    b"MVPW" | u32 version=1 | u32 tensor_count
    per tensor: u16 name_len | name (UTF-8) | u8 dtype (0 = f32) | u8 ndim
                | ndim x u32 dims | raw f32 data

Names are ``<layer-id>.<weight|bias|bn_gamma|bn_beta|bn_mean|bn_var>``.
Batch-norm statistics are stored raw and folded when the file is loaded.
"""
from __future__ import annotations

import os
import struct
import warnings
from typing import Dict

import numpy as np

from ..errors import (BadMagicError, MissingTensorError, ShapeMismatchError,
                      TruncatedFileError, VersionMismatchError, WeightFileError,
                      WeightsNotFoundError)
from .graph import Graph

MAGIC = b"MVPW"
VERSION = 1
DTYPE_F32 = 0


def write_tensors(path, tensors: Dict[str, np.ndarray]) -> None:
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<II", VERSION, len(tensors)))
        for name, arr in tensors.items():
            arr = np.ascontiguousarray(arr, dtype="<f4")
            raw = name.encode("utf-8")
            f.write(struct.pack("<H", len(raw)))
            f.write(raw)
            f.write(struct.pack("<BB", DTYPE_F32, arr.ndim))
            f.write(struct.pack(f"<{arr.ndim}I", *arr.shape))
            f.write(arr.tobytes())


def save_weights(path, graph: Graph) -> None:
    if graph.tensors is None:
        raise WeightFileError("graph has no bound weights to save")
    write_tensors(path, graph.tensors)


class _Reader:
    def __init__(self, buf: bytes):
        self.buf = buf
        self.pos = 0

    def take(self, n: int, what: str, tensor=None) -> bytes:
        if self.pos + n > len(self.buf):
            raise TruncatedFileError(f"file truncated while reading {what}", tensor)
        out = self.buf[self.pos:self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str, what: str, tensor=None):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt), what, tensor))


def read_tensors(path) -> Dict[str, np.ndarray]:
    if not os.path.isfile(path):
        raise WeightsNotFoundError(f"weight file not found: {path}")
    with open(path, "rb") as f:
        r = _Reader(f.read())
    magic = r.take(4, "magic")
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}, expected {MAGIC!r}")
    version, count = r.unpack("<II", "header")
    if version != VERSION:
        raise VersionMismatchError(f"unsupported weight file version {version}, expected {VERSION}")
    tensors = {}
    for i in range(count):
        (nlen,) = r.unpack("<H", f"name length of tensor #{i}")
        try:
            name = r.take(nlen, f"name of tensor #{i}").decode("utf-8")
        except UnicodeDecodeError as e:
            raise WeightFileError(f"tensor #{i} name is not valid UTF-8") from e
        dtype, ndim = r.unpack("<BB", "dtype/ndim", name)
        if dtype != DTYPE_F32:
            raise WeightFileError(f"unsupported dtype code {dtype}", name)
        dims = r.unpack(f"<{ndim}I", "dims", name)
        n = int(np.prod(dims)) if ndim else 1
        data = r.take(4 * n, "data", name)
        tensors[name] = np.frombuffer(data, dtype="<f4").astype(np.float32).reshape(dims)
    if r.pos != len(r.buf):
        raise WeightFileError(f"{len(r.buf) - r.pos} trailing bytes after the last tensor")
    return tensors


def load_weights(path, graph: Graph) -> Graph:
    """Return a new graph bound to the tensors in ``path``.

    Nothing is bound unless every expected tensor is present with the right
    shape. Unknown extra tensors are tolerated with a warning.
    """
    tensors = read_tensors(path)
    expected = graph.tensor_shapes()
    for name, shape in expected.items():
        if name not in tensors:
            raise MissingTensorError("missing tensor", name)
        if tensors[name].shape != tuple(shape):
            raise ShapeMismatchError(f"shape {tensors[name].shape} does not match expected {tuple(shape)}", name)
    extras = [n for n in tensors if n not in expected]
    if extras:
        warnings.warn(f"ignoring unknown tensors in {path}: {', '.join(extras)}", stacklevel=2)
    return graph.bind({n: tensors[n] for n in expected})
