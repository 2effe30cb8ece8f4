"""Sparse sensors: placement, observation and Voronoi rasterization.

Sensor positions are integer cells ``(i, j)`` with ``0 <= i < nx`` and
``0 <= j < ny``; they are shared by all channels at a given timestep and may
move between timesteps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dsovt import kernels
from dsovt.data import Field, FieldSequence
from dsovt.errors import BoundsError, CapacityError, ContractError, FormatError, ShapeError

_JITTER_RETRIES = 64


@dataclass(frozen=True)
class SensorFrame:
    positions: np.ndarray  # (K, 2) int64
    values: np.ndarray     # (K, nc) float

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.int64).reshape(-1, 2)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.ndim == 1:
            vals = vals[:, None]
        if len(pos) != len(vals):
            raise ShapeError(f"{len(pos)} positions but {len(vals)} value rows")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "values", vals)

    @property
    def k(self):
        return len(self.positions)


@dataclass(frozen=True)
class SensorSeries:
    frames: tuple

    @property
    def t(self):
        return len(self.frames)

    def __getitem__(self, idx):
        return self.frames[idx]

    def __len__(self):
        return len(self.frames)

    def coverage(self, nx, ny):
        """Mean fraction of grid cells carrying a sensor."""
        return float(np.mean([f.k for f in self.frames])) / (nx * ny)

    def validate(self, nx, ny):
        for t, f in enumerate(self.frames):
            if not 1 <= f.k < nx * ny:
                raise CapacityError(f"timestep {t}: K={f.k} must satisfy 1 <= K < {nx * ny}")
            _check_positions(f.positions, nx, ny)
            if len({(int(i), int(j)) for i, j in f.positions}) != f.k:
                raise ContractError(f"timestep {t}: duplicate sensor positions")
        return self


@dataclass(frozen=True)
class VoronoiField:
    values: np.ndarray  # (nx, ny, nc)
    owner: np.ndarray   # (nx, ny) int32 sensor index


def _check_positions(positions, nx, ny):
    pos = np.asarray(positions)
    bad = np.flatnonzero((pos[:, 0] < 0) | (pos[:, 0] >= nx) | (pos[:, 1] < 0) | (pos[:, 1] >= ny))
    if bad.size:
        k = int(bad[0])
        raise BoundsError(f"sensor {k} at {tuple(int(c) for c in pos[k])} outside {nx}x{ny} grid")


def observe(field, positions):
    """Channel values of ``field`` at each position, in input order."""
    values = field.values if isinstance(field, Field) else np.asarray(field)
    pos = np.asarray(positions, dtype=np.int64).reshape(-1, 2)
    _check_positions(pos, values.shape[0], values.shape[1])
    return values[pos[:, 0], pos[:, 1], :]


def _frames_of(seq):
    return seq.values if isinstance(seq, FieldSequence) else np.asarray(seq)


def sample_sensors_random(seq, k, seed, mask=None):
    """Draw ``k`` distinct valid cells uniformly, independently per timestep."""
    values = _frames_of(seq)
    _, nx, ny, _ = values.shape
    valid = np.flatnonzero(np.ones(nx * ny, bool) if mask is None else np.asarray(mask, bool).reshape(-1))
    if not 1 <= k < valid.size:
        raise CapacityError(f"k={k} sensors need 1 <= k < {valid.size} valid cells")
    rng = np.random.default_rng(seed)
    frames = []
    for frame in values:
        flat = rng.choice(valid, size=k, replace=False)
        pos = np.stack(np.divmod(flat, ny), axis=1)
        frames.append(SensorFrame(pos, observe(frame, pos)))
    return SensorSeries(tuple(frames))


def lattice(base_count, nx, ny):
    """Near-square ``rows x cols`` lattice of cell centres covering the grid."""
    rows = math.isqrt(base_count)
    while base_count % rows:
        rows -= 1
    cols = base_count // rows
    xi = np.floor((np.arange(rows) + 0.5) * nx / rows).astype(np.int64)
    yj = np.floor((np.arange(cols) + 0.5) * ny / cols).astype(np.int64)
    return np.stack(np.meshgrid(xi, yj, indexing="ij"), axis=-1).reshape(-1, 2)


def jitter_positions(base, jitter, nx, ny, rng):
    """Displace each lattice point by integer offsets in [-jitter, jitter]^2.

    Positions are clamped to the grid. A sensor landing on an occupied cell
    re-draws its offset; after a bounded number of tries it returns to its
    lattice point, or failing that takes the first free cell of its box.
    """
    taken = set()
    out = np.empty_like(base)
    for n, (bi, bj) in enumerate(base):
        for _ in range(_JITTER_RETRIES):
            di, dj = rng.integers(-jitter, jitter + 1, size=2)
            p = (min(max(bi + di, 0), nx - 1), min(max(bj + dj, 0), ny - 1))
            if p not in taken:
                break
        else:
            p = (int(bi), int(bj))
            if p in taken:
                box = [(min(max(bi + a, 0), nx - 1), min(max(bj + b, 0), ny - 1))
                       for a in range(-jitter, jitter + 1) for b in range(-jitter, jitter + 1)]
                free = [q for q in box if q not in taken]
                if not free:
                    raise CapacityError(f"no free cell within jitter {jitter} of lattice point {(bi, bj)}")
                p = free[0]
        taken.add(p)
        out[n] = p
    return out


def sample_sensors_jittered(seq, base_count=100, jitter=2, seed=0):
    """Lattice sensors moved by a fresh random jitter at every timestep."""
    values = _frames_of(seq)
    _, nx, ny, _ = values.shape
    if not 1 <= base_count < nx * ny:
        raise CapacityError(f"base_count={base_count} must be in [1, {nx * ny})")
    base = lattice(base_count, nx, ny)
    rng = np.random.default_rng(seed)
    frames = []
    for frame in values:
        pos = jitter_positions(base, jitter, nx, ny, rng) if jitter else base.copy()
        frames.append(SensorFrame(pos, observe(frame, pos)))
    return SensorSeries(tuple(frames))


def tessellate(sensors, nx, ny, nc=None):
    """Rasterize sensor values onto the grid by nearest-sensor ownership.

    ``sensors`` is a SensorFrame or a ``(positions, values)`` pair. Ties in
    distance go to the lowest sensor index.
    """
    if not isinstance(sensors, SensorFrame):
        sensors = SensorFrame(*sensors)
    if sensors.k == 0:
        raise ContractError("tessellate needs at least one sensor")
    if nc is not None and sensors.values.shape[1] != nc:
        raise ShapeError(f"sensor values have {sensors.values.shape[1]} channels, expected {nc}")
    _check_positions(sensors.positions, nx, ny)
    owner = kernels.nearest_owner(sensors.positions, nx, ny)
    return VoronoiField(sensors.values[owner], owner)


def nearest_owner_reference(positions, nx, ny):
    """Cell-by-cell scan over every sensor; slow, used as an oracle."""
    pos = [(int(i), int(j)) for i, j in np.asarray(positions).reshape(-1, 2)]
    owner = np.empty((nx, ny), dtype=np.int32)
    for x in range(nx):
        for y in range(ny):
            best, dmin = 0, None
            for q, (i, j) in enumerate(pos):
                d = (x - i) ** 2 + (y - j) ** 2
                if dmin is None or d < dmin:
                    best, dmin = q, d
            owner[x, y] = best
    return owner


def tessellate_series(series, nx, ny, dtype=np.float32):
    """Stack of tessellated fields, shape (T, nx, ny, nc)."""
    nc = series[0].values.shape[1]
    out = np.empty((series.t, nx, ny, nc), dtype=dtype)
    for t, frame in enumerate(series.frames):
        out[t] = tessellate(frame, nx, ny).values
    return out


# --- text serialization ---------------------------------------------------------------

def write_sensors(path, series):
    """One block per timestep: ``# t=<t> k=<k>`` then k lines ``i j v1 .. vnc``."""
    lines = []
    for t, f in enumerate(series.frames):
        lines.append(f"# t={t} k={f.k}")
        for (i, j), vals in zip(f.positions, f.values):
            lines.append(" ".join([str(int(i)), str(int(j))] + [repr(float(v)) for v in vals]))
    Path(path).write_text("\n".join(lines) + "\n")


def read_sensors(path):
    frames = []
    pos, vals, expect = [], [], None

    def flush():
        if expect is not None:
            if len(pos) != expect:
                raise FormatError(f"{path}: block {len(frames)} declares k={expect}, has {len(pos)} lines")
            frames.append(SensorFrame(np.array(pos, dtype=np.int64).reshape(-1, 2), np.array(vals)))

    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            flush()
            fields = dict(tok.split("=") for tok in line[1:].split())
            expect = int(fields["k"])
            pos, vals = [], []
            continue
        parts = line.split()
        pos.append((int(parts[0]), int(parts[1])))
        vals.append([float(v) for v in parts[2:]])
    flush()
    return SensorSeries(tuple(frames))
