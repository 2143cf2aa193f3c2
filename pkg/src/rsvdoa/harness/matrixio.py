"""Binary container for snapshot matrices and cached RSV bases.

Layout (all little-endian)::

    magic    4 bytes   b"RSVS" (snapshots) or b"RSVB" (basis)
    version  uint32    1
    rows     uint32    M
    cols     uint32    L (snapshots) or N (basis)
    data     rows*cols pairs of float64 (real, imag), row-major
    -- basis only --
    tag      4 bytes   b"GRID"
    N        uint32
    flags    uint32    bit 0: normalised
    angles   N float64 (radians)
"""
from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from ..array_model import SnapshotMatrix
from ..calibration import AngularGrid, RsvBasis

VERSION = 1
SNAPSHOT_MAGIC = b"RSVS"
BASIS_MAGIC = b"RSVB"
_HEADER = struct.Struct("<4sIII")
_GRID = struct.Struct("<4sII")


class FormatError(ValueError):
    pass


def _pack_matrix(magic: bytes, data: np.ndarray) -> bytes:
    rows, cols = data.shape
    body = np.ascontiguousarray(data, dtype="<c16").tobytes()
    return _HEADER.pack(magic, VERSION, rows, cols) + body


def _unpack_matrix(buf: bytes, magic: bytes):
    if len(buf) < _HEADER.size:
        raise FormatError("file too short for header")
    got, version, rows, cols = _HEADER.unpack_from(buf)
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}")
    if version != VERSION:
        raise FormatError(f"unsupported version {version}")
    end = _HEADER.size + 16 * rows * cols
    if len(buf) < end:
        raise FormatError("truncated matrix payload")
    data = np.frombuffer(buf, dtype="<c16", count=rows * cols, offset=_HEADER.size)
    return data.reshape(rows, cols).astype(complex), end


def write_snapshots(path, snapshots) -> None:
    data = snapshots.data if isinstance(snapshots, SnapshotMatrix) else np.asarray(snapshots)
    Path(path).write_bytes(_pack_matrix(SNAPSHOT_MAGIC, data))


def read_snapshots(path) -> SnapshotMatrix:
    buf = Path(path).read_bytes()
    data, end = _unpack_matrix(buf, SNAPSHOT_MAGIC)
    if end != len(buf):
        raise FormatError("trailing bytes after snapshot payload")
    return SnapshotMatrix(data)


def write_basis(path, basis: RsvBasis) -> None:
    grid = _GRID.pack(b"GRID", basis.grid.N, int(basis.normalized))
    angles = np.ascontiguousarray(basis.grid.angles, dtype="<f8").tobytes()
    Path(path).write_bytes(_pack_matrix(BASIS_MAGIC, basis.matrix) + grid + angles)


def read_basis(path) -> RsvBasis:
    buf = Path(path).read_bytes()
    matrix, off = _unpack_matrix(buf, BASIS_MAGIC)
    if len(buf) < off + _GRID.size:
        raise FormatError("missing grid descriptor")
    tag, N, flags = _GRID.unpack_from(buf, off)
    off += _GRID.size
    if tag != b"GRID" or N != matrix.shape[1]:
        raise FormatError("grid descriptor does not match basis")
    angles = np.frombuffer(buf, dtype="<f8", count=N, offset=off)
    grid = AngularGrid(N)
    if not np.array_equal(angles, grid.angles):
        raise FormatError("stored grid angles differ from the canonical grid")
    if off + 8 * N != len(buf):
        raise FormatError("trailing bytes after grid descriptor")
    return RsvBasis(matrix, grid, normalized=bool(flags & 1))
