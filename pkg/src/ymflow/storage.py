"""On-disk field checkpoints and trajectory manifests.

Field checkpoint format ("YMF1"):

    offset  size  contents
    0       4     magic b"YMF1"
    4       1     endianness flag (1 = little-endian payload)
    5       1     group kind code (0 = u1, 1 = su, 2 = u)
    6       1     matrix dimension N of the group
    7       1     reserved (0)
    8       4     uint32 cutoff
    12      4     uint32 algebra dimension d_g
    16      ...   complex128 little-endian coefficients, C order, indexed
                  (a, j, n1, n2, n3) with each n axis running -N..N

Round trips are bit-exact.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .fields import SpectralConnection
from .groups import GroupSpec

__all__ = ["write_field", "read_field", "FieldFileError",
           "write_manifest", "read_manifest"]

MAGIC = b"YMF1"
_KIND_CODE = {"u1": 0, "su": 1, "u": 2}
_CODE_KIND = {v: k for k, v in _KIND_CODE.items()}
_HEADER = struct.Struct("<4sBBBBII")


class FieldFileError(Exception):
    pass


def write_field(path, a: SpectralConnection) -> None:
    path = Path(path)
    header = _HEADER.pack(
        MAGIC, 1, _KIND_CODE[a.group.kind], a.group.matrix_dim, 0,
        a.cutoff, a.group.algebra_dim,
    )
    payload = np.ascontiguousarray(a.coeffs, dtype="<c16").tobytes()
    path.write_bytes(header + payload)


def read_field(path) -> SpectralConnection:
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < _HEADER.size:
        raise FieldFileError(f"{path}: truncated header")
    magic, endian, kind_code, mdim, _, cutoff, d_g = _HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FieldFileError(f"{path}: bad magic {magic!r}")
    if endian != 1:
        raise FieldFileError(f"{path}: unsupported endianness flag {endian}")
    if kind_code not in _CODE_KIND:
        raise FieldFileError(f"{path}: unknown group kind code {kind_code}")
    group = GroupSpec(_CODE_KIND[kind_code], mdim)
    if group.algebra_dim != d_g:
        raise FieldFileError(
            f"{path}: algebra dimension {d_g} inconsistent with group {group.label()}"
        )
    k = 2 * cutoff + 1
    expected = d_g * 3 * k**3
    data = np.frombuffer(raw, dtype="<c16", offset=_HEADER.size)
    if data.size != expected:
        raise FieldFileError(
            f"{path}: expected {expected} coefficients, found {data.size}"
        )
    coeffs = data.reshape(d_g, 3, k, k, k).astype(np.complex128)
    return SpectralConnection(group, cutoff, coeffs)


def write_manifest(path, manifest: dict) -> None:
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def read_manifest(path) -> dict:
    return json.loads(Path(path).read_text())
