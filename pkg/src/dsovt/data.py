"""Grid fields, the DSVT tensor container, normalization and ingestion.

Arrays are indexed ``[x, y, channel]`` for a single frame and
``[t, x, y, channel]`` for a sequence.
"""
from __future__ import annotations

import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dsovt.errors import FormatError, LengthError, ShapeError, ValidationError

log = logging.getLogger(__name__)

MAGIC = b"DSVT"
VERSION = 1
DTYPE_F32LE = 1
HEADER = struct.Struct("<4sBBBB4I")  # magic, version, dtype, ndim, reserved, T, Nx, Ny, Nc
MIN_GRID = 8


def _check_grid(nx, ny, nc):
    if nx < MIN_GRID or ny < MIN_GRID or nc < 1:
        raise ShapeError(f"grid must be at least {MIN_GRID}x{MIN_GRID} with >=1 channel, got {nx}x{ny}x{nc}")


@dataclass(frozen=True)
class Field:
    """One dense snapshot, ``values`` of shape (nx, ny, nc)."""

    values: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 3:
            raise ShapeError(f"Field needs a 3-d array (nx, ny, nc), got shape {v.shape}")
        _check_grid(*v.shape)
        if not np.isfinite(v).all():
            raise ValidationError("Field contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def nx(self):
        return self.values.shape[0]

    @property
    def ny(self):
        return self.values.shape[1]

    @property
    def nc(self):
        return self.values.shape[2]


@dataclass(frozen=True)
class FieldSequence:
    """T snapshots sharing one grid, stored as a (T, nx, ny, nc) array."""

    values: np.ndarray
    dt_index: int = 1

    def __post_init__(self):
        v = np.asarray(self.values)
        if v.ndim != 4:
            raise ShapeError(f"FieldSequence needs a 4-d array (T, nx, ny, nc), got shape {v.shape}")
        if v.shape[0] < 1:
            raise ShapeError("FieldSequence needs at least one frame")
        _check_grid(*v.shape[1:])
        if not np.isfinite(v).all():
            raise ValidationError("FieldSequence contains non-finite values")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_frames(cls, frames, dt_index=1):
        arrays = [f.values if isinstance(f, Field) else np.asarray(f) for f in frames]
        shapes = {a.shape for a in arrays}
        if len(shapes) != 1:
            raise ShapeError(f"frames have inconsistent shapes: {sorted(shapes)}")
        return cls(np.stack(arrays), dt_index=dt_index)

    @property
    def t(self):
        return self.values.shape[0]

    @property
    def shape(self):
        return self.values.shape[1:]

    @property
    def frames(self):
        return [Field(f) for f in self.values]

    def __len__(self):
        return self.t

    def __getitem__(self, idx):
        return Field(self.values[idx])


# --- DSVT container -------------------------------------------------------------

def write_tensor(path, seq):
    """Write ``seq`` as a DSVT file (little-endian float32 payload)."""
    values = seq.values if isinstance(seq, FieldSequence) else np.asarray(seq)
    if values.ndim != 4:
        raise ShapeError(f"expected (T, nx, ny, nc) data, got shape {values.shape}")
    data = np.ascontiguousarray(values, dtype="<f4")
    if not np.isfinite(data).all():
        raise ValidationError(f"refusing to write non-finite values to {path}")
    header = HEADER.pack(MAGIC, VERSION, DTYPE_F32LE, 4, 0, *data.shape)
    path = Path(path)
    tmp = path.with_name(path.name + ".part")
    try:
        with open(tmp, "wb") as fh:
            fh.write(header)
            fh.write(data.tobytes(order="C"))
        os.replace(tmp, path)
    except OSError as exc:
        raise OSError(f"cannot write tensor file {path}: {exc}") from exc


def read_tensor(path):
    path = Path(path)
    raw = path.read_bytes()
    if len(raw) < HEADER.size:
        raise LengthError(f"{path}: header needs {HEADER.size} bytes, file has {len(raw)}")
    magic, version, dtype, ndim, _reserved, *dims = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise FormatError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
    if version != VERSION:
        raise FormatError(f"{path}: unsupported version {version}")
    if dtype != DTYPE_F32LE:
        raise FormatError(f"{path}: unsupported dtype code {dtype}")
    if ndim != 4:
        raise FormatError(f"{path}: expected ndim 4, got {ndim}")
    expected = int(np.prod(dims)) * 4
    actual = len(raw) - HEADER.size
    if actual != expected:
        raise LengthError(f"{path}: payload has {actual} bytes, expected {expected} for dims {tuple(dims)}")
    values = np.frombuffer(raw, dtype="<f4", offset=HEADER.size).reshape(dims)
    return FieldSequence(values.astype(np.float32))


# --- normalization ----------------------------------------------------------------

@dataclass(frozen=True)
class NormStats:
    """Per-channel minimum and maximum used for min-max scaling."""

    minimum: np.ndarray
    maximum: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.minimum, dtype=np.float64).reshape(-1)
        hi = np.asarray(self.maximum, dtype=np.float64).reshape(-1)
        if lo.shape != hi.shape:
            raise ShapeError("minimum and maximum must have one entry per channel")
        if np.any(hi < lo):
            raise ValidationError("NormStats maximum below minimum")
        object.__setattr__(self, "minimum", lo)
        object.__setattr__(self, "maximum", hi)

    @property
    def nc(self):
        return self.minimum.size

    @property
    def constant(self):
        return self.maximum == self.minimum

    @property
    def span(self):
        return self.maximum - self.minimum

    @classmethod
    def from_values(cls, values, mask=None):
        v = np.asarray(values, dtype=np.float64)
        flat = v.reshape(-1, v.shape[-1])
        if mask is not None:
            m = np.broadcast_to(np.asarray(mask, bool), v.shape[-3:-1])
            keep = np.broadcast_to(m, v.shape[:-1]).reshape(-1)
            flat = flat[keep]
        return cls(flat.min(axis=0), flat.max(axis=0))

    def to_dict(self):
        return {"minimum": self.minimum.tolist(), "maximum": self.maximum.tolist()}

    @classmethod
    def from_dict(cls, d):
        return cls(d["minimum"], d["maximum"])


def _values(seq):
    return seq.values if isinstance(seq, FieldSequence) else np.asarray(seq)


def normalize(seq, stats=None, mask=None):
    """Per-channel min-max scaling to [0, 1]; constant channels become 0.5.

    Returns ``(normalized, stats)``; stats are computed from ``seq`` (valid
    cells only when ``mask`` is given) unless supplied.
    """
    values = _values(seq).astype(np.float64)
    if stats is None:
        stats = NormStats.from_values(values, mask)
    if values.shape[-1] != stats.nc:
        raise ShapeError(f"data has {values.shape[-1]} channels, stats have {stats.nc}")
    span = np.where(stats.constant, 1.0, stats.span)
    out = (values - stats.minimum) / span
    out = np.where(stats.constant, 0.5, out)
    if isinstance(seq, FieldSequence):
        return FieldSequence(out, dt_index=seq.dt_index), stats
    return out, stats


def denormalize(seq, stats):
    values = _values(seq).astype(np.float64)
    if values.shape[-1] != stats.nc:
        raise ShapeError(f"data has {values.shape[-1]} channels, stats have {stats.nc}")
    out = values * stats.span + stats.minimum
    if isinstance(seq, FieldSequence):
        return FieldSequence(out, dt_index=seq.dt_index)
    return out


# --- ingestion ------------------------------------------------------------------------

def write_csv_frames(directory, seq):
    """Write one ``frame_%05d.csv`` per frame: ny rows of nx*nc values."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    values = _values(seq)
    _, nx, ny, nc = values.shape
    for t, frame in enumerate(values):
        # row j holds cells (0, j), (1, j), ... with channels contiguous per cell
        rows = frame.transpose(1, 0, 2).reshape(ny, nx * nc)
        np.savetxt(directory / f"frame_{t:05d}.csv", rows, delimiter=",", fmt="%.9g")


def _read_csv_frames(directory, nc):
    files = sorted(Path(directory).glob("frame_*.csv"))
    if not files:
        raise FormatError(f"{directory}: no frame_*.csv files")
    frames = []
    shape = None
    for f in files:
        rows = np.loadtxt(f, delimiter=",", dtype=np.float64, ndmin=2)
        if rows.shape[1] % nc:
            raise ShapeError(f"{f}: {rows.shape[1]} columns is not a multiple of nc={nc}")
        if shape is not None and rows.shape != shape:
            raise ShapeError(f"{f}: shape {rows.shape} differs from first frame {shape}")
        shape = rows.shape
        ny, width = rows.shape
        frames.append(rows.reshape(ny, width // nc, nc).transpose(1, 0, 2))
    return np.stack(frames).astype(np.float32)


def ingest_grid_series(path, mask_value=None, nc=1):
    """Load a DSVT file or a CSV-per-frame directory.

    Returns ``(sequence, mask)`` with ``mask[x, y]`` True for valid cells.
    A cell is invalid when any of its values equals ``mask_value`` in any
    frame; invalid cells are zero-filled in every frame and channel.
    """
    path = Path(path)
    if path.is_dir():
        values = _read_csv_frames(path, nc)
    else:
        values = np.array(read_tensor(path).values)
    if mask_value is None:
        mask = np.ones(values.shape[1:3], dtype=bool)
    else:
        mask = ~np.any(values == np.float32(mask_value), axis=(0, 3))
        values = np.where(mask[None, :, :, None], values, 0.0).astype(values.dtype)
        log.info("ingest %s: %d of %d cells masked", path, int((~mask).sum()), mask.size)
    return FieldSequence(values), mask


__all__ = [
    "Field", "FieldSequence", "NormStats", "write_tensor", "read_tensor", "normalize",
    "denormalize", "ingest_grid_series", "write_csv_frames",
]
