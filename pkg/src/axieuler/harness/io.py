"""Snapshot files, run manifests and diagnostics tables.

Snapshot layout (all integers little-endian)::

    b"AXEFSNAP"                  8-byte magic
    uint16 version               currently 1
    uint32 header length n
    n bytes of UTF-8 JSON        grid descriptor, time, array names
    float64 arrays, '<f8'        in header order, each of shape grid.shape
    uint32 CRC-32                of every preceding byte

A file whose version differs from the reader's is rejected, never
reinterpreted.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import struct
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..grid import PolarGrid, ScalarFieldRZ, VelocityField

__all__ = [
    "SNAPSHOT_VERSION",
    "SnapshotError",
    "SnapshotFormatError",
    "SnapshotVersionError",
    "SnapshotTruncatedError",
    "SnapshotChecksumError",
    "Snapshot",
    "write_snapshot",
    "read_snapshot",
    "snapshot_to_csv",
    "git_blob_hash",
    "tree_hash",
    "write_table",
    "read_table",
    "write_json",
    "json_ready",
]

MAGIC = b"AXEFSNAP"
SNAPSHOT_VERSION = 1
_PREFIX = struct.Struct("<8sHI")


class SnapshotError(IOError):
    """Base class for unreadable snapshot files."""


class SnapshotFormatError(SnapshotError):
    """Not a snapshot file (bad magic or header)."""


class SnapshotVersionError(SnapshotError):
    """Snapshot written by a different format version."""


class SnapshotTruncatedError(SnapshotError):
    """File shorter than its header says."""


class SnapshotChecksumError(SnapshotError):
    """Payload does not match its CRC-32."""


@dataclass(frozen=True)
class Snapshot:
    """Named nodal arrays on one grid at one time."""

    grid: PolarGrid
    t: float
    arrays: dict

    def field(self, name: str = "w") -> ScalarFieldRZ:
        return ScalarFieldRZ(self.grid, self.arrays[name])

    def velocity(self) -> VelocityField:
        return VelocityField(self.grid, self.arrays["ur"], self.arrays["uz"])


def write_snapshot(path, grid: PolarGrid, t: float, arrays: dict) -> Path:
    """Write named arrays; returns the path.

    Parameters
    ----------
    path : path-like
    grid : PolarGrid
    t : float
    arrays : dict of str -> ndarray
        Each of shape ``grid.shape``; written in insertion order.
    """
    names = list(arrays)
    header = {"grid": grid.descriptor(), "symmetry": grid.symmetry.value,
              "t": float(t).hex(), "names": names, "shape": list(grid.shape)}
    hb = json.dumps(header, sort_keys=True).encode("utf-8")
    buf = io.BytesIO()
    buf.write(_PREFIX.pack(MAGIC, SNAPSHOT_VERSION, len(hb)))
    buf.write(hb)
    for name in names:
        a = np.asarray(arrays[name])
        if a.shape != grid.shape:
            raise ValueError(f"array {name!r} has shape {a.shape}, grid is {grid.shape}")
        buf.write(np.ascontiguousarray(a, dtype="<f8").tobytes())
    body = buf.getvalue()
    path = Path(path)
    path.write_bytes(body + struct.pack("<I", zlib.crc32(body)))
    return path


def read_snapshot(path) -> Snapshot:
    """Read a snapshot written by `write_snapshot`.

    Raises
    ------
    SnapshotFormatError, SnapshotVersionError, SnapshotTruncatedError,
    SnapshotChecksumError
    """
    data = Path(path).read_bytes()
    if len(data) < _PREFIX.size:
        if MAGIC.startswith(data[:8]):
            raise SnapshotTruncatedError(f"{path}: file ends inside the header")
        raise SnapshotFormatError(f"{path}: not a snapshot file")
    magic, version, n = _PREFIX.unpack_from(data)
    if magic != MAGIC:
        raise SnapshotFormatError(f"{path}: not a snapshot file")
    if version != SNAPSHOT_VERSION:
        raise SnapshotVersionError(
            f"{path}: format version {version}, this reader handles {SNAPSHOT_VERSION}")
    off = _PREFIX.size
    if len(data) < off + n:
        raise SnapshotTruncatedError(f"{path}: file ends inside the header")
    try:
        header = json.loads(data[off:off + n].decode("utf-8"))
        grid = PolarGrid.from_descriptor(header["grid"])
        names = list(header["names"])
        t = float.fromhex(header["t"])
    except (ValueError, KeyError, TypeError) as exc:
        raise SnapshotFormatError(f"{path}: bad header ({exc})") from exc
    off += n
    size = grid.size * 8
    need = off + size * len(names) + 4
    if len(data) < need:
        raise SnapshotTruncatedError(f"{path}: {len(data)} bytes, expected {need}")
    if len(data) > need:
        raise SnapshotFormatError(f"{path}: {len(data) - need} trailing bytes")
    (crc,) = struct.unpack_from("<I", data, need - 4)
    if zlib.crc32(data[:need - 4]) != crc:
        raise SnapshotChecksumError(f"{path}: checksum mismatch")
    arrays = {}
    for name in names:
        a = np.frombuffer(data, dtype="<f8", count=grid.size, offset=off)
        arrays[name] = a.reshape(grid.shape).astype(float)
        off += size
    return Snapshot(grid, t, arrays)


def snapshot_to_csv(snap: Snapshot, out) -> None:
    """Write one row per node: i, j, rho, phi, r, z and every array.

    Floats use 17 significant digits, so the CSV round-trips exactly.
    """
    g = snap.grid
    r, z = g.nodes
    names = list(snap.arrays)
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["i", "j", "rho", "phi", "r", "z", *names])
    for i in range(g.n_rho):
        for j in range(g.n_phi):
            vals = [g.rho[i], g.phi[j], r[i, j], z[i, j]] + [snap.arrays[k][i, j] for k in names]
            writer.writerow([i, j] + [_fmt(v) for v in vals])


def _fmt(v) -> str:
    return repr(float(v))


def git_blob_hash(path) -> str:
    """SHA-1 of ``b"blob <size>\\0" + content``, as git computes it."""
    data = Path(path).read_bytes()
    h = hashlib.sha1(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def tree_hash(entries: dict) -> str:
    """SHA-1 over sorted ``name blobhash`` lines."""
    h = hashlib.sha1()
    for name in sorted(entries):
        h.update(f"{name} {entries[name]}\n".encode("utf-8"))
    return h.hexdigest()


def write_table(path, columns: list, rows: list) -> None:
    """CSV with a header row; floats at 17 significant digits."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def read_table(path) -> dict:
    """Inverse of `write_table`: column name -> float array."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        columns = next(reader)
        rows = [[float(v) for v in row] for row in reader]
    data = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    return {c: data[:, k] for k, c in enumerate(columns)}


def write_json(path, obj) -> None:
    """Pretty JSON with sorted keys; NaN and infinities become null."""
    text = json.dumps(json_ready(obj), sort_keys=True, indent=2, default=_json_default,
                      allow_nan=False)
    Path(path).write_text(text + "\n")


def json_ready(o):
    """Recursively convert arrays and numpy scalars; non-finite floats become None."""
    if isinstance(o, dict):
        return {k: json_ready(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [json_ready(v) for v in o]
    if isinstance(o, np.ndarray):
        return json_ready(o.tolist())
    if isinstance(o, (float, np.floating)):
        return float(o) if np.isfinite(o) else None
    return o


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")
