"""Binary field snapshots and trajectory checkpoints.

Snapshot layout (little-endian):

    magic  b"RQHD"
    version u32
    dim u32
    points u32[dim]
    extent f64[dim]
    kind u8           0 real, 1 complex, 2 vector
    samples           row-major; vectors stored as (*points, dim)

A checkpoint is ``{nsteps u64, dt f64}`` followed by ``2 * (nsteps + 1)``
complex snapshots, alternating ``phi`` and ``phi_t``.
"""

from __future__ import annotations

import struct
from pathlib import Path
from typing import BinaryIO

import numpy as np

from .errors import SnapshotError
from .kg import KGState, Trajectory
from .spectral import SpectralGrid

MAGIC = b"RQHD"
VERSION = 1
KIND_REAL, KIND_COMPLEX, KIND_VECTOR = 0, 1, 2
_DTYPES = {KIND_REAL: "<f8", KIND_COMPLEX: "<c16", KIND_VECTOR: "<f8"}


def _kind_of(grid: SpectralGrid, values: np.ndarray) -> int:
    if values.shape == grid.shape:
        return KIND_COMPLEX if np.iscomplexobj(values) else KIND_REAL
    if values.shape == (grid.dim,) + grid.shape and not np.iscomplexobj(values):
        return KIND_VECTOR
    raise SnapshotError(f"field of shape {values.shape} does not match grid {grid.shape}")


def write_snapshot_to(fh: BinaryIO, grid: SpectralGrid, values: np.ndarray) -> None:
    values = np.asarray(values)
    kind = _kind_of(grid, values)
    fh.write(MAGIC)
    fh.write(struct.pack("<II", VERSION, grid.dim))
    fh.write(struct.pack(f"<{grid.dim}I", *grid.points))
    fh.write(struct.pack(f"<{grid.dim}d", *grid.extent))
    fh.write(struct.pack("<B", kind))
    if kind == KIND_VECTOR:
        values = np.moveaxis(values, 0, -1)
    fh.write(np.ascontiguousarray(values, dtype=_DTYPES[kind]).tobytes())


def _read_exact(fh: BinaryIO, n: int) -> bytes:
    buf = fh.read(n)
    if len(buf) != n:
        raise SnapshotError(f"truncated snapshot: wanted {n} bytes, got {len(buf)}")
    return buf


def read_snapshot_from(fh: BinaryIO) -> tuple[SpectralGrid, np.ndarray]:
    if _read_exact(fh, 4) != MAGIC:
        raise SnapshotError("bad magic; not an RQHD snapshot")
    version, dim = struct.unpack("<II", _read_exact(fh, 8))
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version}")
    if dim not in (1, 2, 3):
        raise SnapshotError(f"invalid dimension {dim}")
    points = struct.unpack(f"<{dim}I", _read_exact(fh, 4 * dim))
    extent = struct.unpack(f"<{dim}d", _read_exact(fh, 8 * dim))
    (kind,) = struct.unpack("<B", _read_exact(fh, 1))
    if kind not in _DTYPES:
        raise SnapshotError(f"unknown field kind {kind}")
    try:
        grid = SpectralGrid(tuple(points), tuple(extent))
    except ValueError as exc:
        raise SnapshotError(f"invalid grid in snapshot: {exc}") from exc
    shape = grid.shape + ((dim,) if kind == KIND_VECTOR else ())
    dtype = np.dtype(_DTYPES[kind])
    count = int(np.prod(shape))
    data = np.frombuffer(_read_exact(fh, count * dtype.itemsize), dtype=dtype).reshape(shape)
    if kind == KIND_VECTOR:
        data = np.moveaxis(data, -1, 0)
    return grid, np.array(data, dtype=complex if kind == KIND_COMPLEX else float)


def write_snapshot(path: str | Path, grid: SpectralGrid, values: np.ndarray) -> None:
    with open(path, "wb") as fh:
        write_snapshot_to(fh, grid, values)


def read_snapshot(path: str | Path) -> tuple[SpectralGrid, np.ndarray]:
    with open(path, "rb") as fh:
        return read_snapshot_from(fh)


def write_checkpoint(path: str | Path, traj: Trajectory[KGState]) -> None:
    grid = traj[0].grid
    with open(path, "wb") as fh:
        fh.write(struct.pack("<Qd", len(traj) - 1, traj.dt))
        for s in traj:
            write_snapshot_to(fh, grid, s.phi)
            write_snapshot_to(fh, grid, s.phi_t)


def read_checkpoint(path: str | Path, t0: float = 0.0) -> Trajectory[KGState]:
    with open(path, "rb") as fh:
        nsteps, dt = struct.unpack("<Qd", _read_exact(fh, 16))
        states = []
        for i in range(nsteps + 1):
            grid, phi = read_snapshot_from(fh)
            _, phi_t = read_snapshot_from(fh)
            states.append(KGState(grid, phi, phi_t, t0 + i * dt))
    return Trajectory(dt, states)
