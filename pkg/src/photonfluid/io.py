"""Binary snapshot/raster formats and CSV emitters.

PFLD (complex field), little-endian::

    b"PFLD" | u16 version | u32 nx | u32 ny | f64 lx | f64 ly | f64 z |
    nx*ny (re, im) f64 pairs, row-major over [ix, iy] (iy fastest)

PRAS is identical with magic b"PRAS" and a real f64 payload.
"""
from __future__ import annotations

import csv
import struct
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .solver import FieldState, Grid

FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIIddd")
FIELD_MAGIC = b"PFLD"
RASTER_MAGIC = b"PRAS"


class FormatError(ValueError):
    pass


def _header(magic: bytes, nx: int, ny: int, lx: float, ly: float, z: float) -> bytes:
    return _HEADER.pack(magic, FORMAT_VERSION, nx, ny, lx, ly, z)


def encode_field(psi: np.ndarray, lx: float, ly: float, z: float) -> bytes:
    psi = np.asarray(psi, dtype="<c16")
    if psi.ndim != 2:
        raise ValueError("PFLD stores a single 2-D complex field")
    nx, ny = psi.shape
    return _header(FIELD_MAGIC, nx, ny, lx, ly, z) + np.ascontiguousarray(psi).tobytes()


def encode_raster(values: np.ndarray, lx: float, ly: float, z: float) -> bytes:
    values = np.asarray(values, dtype="<f8")
    if values.ndim != 2:
        raise ValueError("PRAS stores a single 2-D real raster")
    nx, ny = values.shape
    return _header(RASTER_MAGIC, nx, ny, lx, ly, z) + np.ascontiguousarray(values).tobytes()


def _decode(data: bytes, magic: bytes, dtype: str):
    if len(data) < _HEADER.size:
        raise FormatError("truncated header")
    got, version, nx, ny, lx, ly, z = _HEADER.unpack_from(data)
    if got != magic:
        raise FormatError(f"bad magic {got!r}, expected {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    payload = data[_HEADER.size:]
    expected = nx * ny * np.dtype(dtype).itemsize
    if len(payload) != expected:
        raise FormatError(f"payload has {len(payload)} bytes, expected {expected}")
    arr = np.frombuffer(payload, dtype=dtype).reshape(nx, ny).copy()
    return arr, lx, ly, z


def decode_field(data: bytes):
    """``(psi, lx, ly, z)`` from PFLD bytes."""
    return _decode(data, FIELD_MAGIC, "<c16")


def decode_raster(data: bytes):
    return _decode(data, RASTER_MAGIC, "<f8")


def write_field(path, psi, lx, ly, z) -> Path:
    path = Path(path)
    path.write_bytes(encode_field(psi, lx, ly, z))
    return path


def read_field(path):
    return decode_field(Path(path).read_bytes())


def write_raster(path, values, lx, ly, z) -> Path:
    path = Path(path)
    path.write_bytes(encode_raster(values, lx, ly, z))
    return path


def read_raster(path):
    return decode_raster(Path(path).read_bytes())


# -- snapshot directories -----------------------------------------------------

INDEX_NAME = "index.csv"


def snapshot_names(i: int, ncomp: int) -> List[str]:
    if ncomp == 1:
        return [f"snap_{i:06d}.pfld"]
    return [f"snap_{i:06d}_c{j}.pfld" for j in range(ncomp)]


def write_snapshot(directory, i: int, state: FieldState) -> List[str]:
    """One PFLD file per envelope; returns the file names written."""
    directory = Path(directory)
    names = snapshot_names(i, state.ncomp)
    g = state.grid
    for name, psi in zip(names, state.psi):
        write_field(directory / name, psi, g.lx, g.ly, state.z)
    return names


def write_index(directory, rows: Sequence[Tuple[int, float, Sequence[str]]],
                digest: Optional[str] = None) -> Path:
    path = Path(directory) / INDEX_NAME
    with path.open("w", newline="") as fh:
        if digest:
            fh.write(f"# config_digest={digest}\n")
        w = csv.writer(fh)
        w.writerow(["index", "z", "files"])
        for i, z, files in rows:
            w.writerow([i, repr(float(z)), ";".join(files)])
    return path


def read_index(directory) -> List[Tuple[int, float, List[str]]]:
    path = Path(directory) / INDEX_NAME
    rows = []
    with path.open() as fh:
        lines = [ln for ln in fh if not ln.startswith("#")]
    for rec in csv.DictReader(lines):
        rows.append((int(rec["index"]), float(rec["z"]), rec["files"].split(";")))
    return rows


def load_snapshot(directory, files: Sequence[str], dz: float = 0.01) -> FieldState:
    directory = Path(directory)
    fields = []
    meta = None
    for name in files:
        psi, lx, ly, z = read_field(directory / name)
        fields.append(psi)
        meta = (psi.shape, lx, ly, z)
    (nx, ny), lx, ly, z = meta
    return FieldState(np.stack(fields), z, Grid(nx, ny, lx, ly, dz))


def iter_snapshots(directory, dz: float = 0.01):
    directory = Path(directory)
    for _, _, files in read_index(directory):
        yield load_snapshot(directory, files, dz)


# -- CSV ----------------------------------------------------------------------

def write_csv(path, header: Sequence[str], rows: Iterable[Sequence], digest: Optional[str] = None,
              comments: Sequence[str] = ()) -> Path:
    """CSV with ``# config_digest=...`` comment line(s) then a header row."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        if digest is not None:
            fh.write(f"# config_digest={digest}\n")
        for c in comments:
            fh.write(f"# {c}\n")
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])
    return path


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (np.integer,)):
        return int(v)
    return v


def read_csv(path) -> Tuple[List[str], List[dict]]:
    """``(comment_lines, rows)`` with rows as dicts of strings."""
    with Path(path).open() as fh:
        lines = fh.readlines()
    comments = [ln[1:].strip() for ln in lines if ln.startswith("#")]
    body = [ln for ln in lines if not ln.startswith("#")]
    return comments, list(csv.DictReader(body))
