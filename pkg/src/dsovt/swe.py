"""Shallow-water (Saint-Venant) solver and simulation dataset generator.

The solver updates the conservative variables (h, hu, hv) with a first-order
local Lax-Friedrichs flux on a unit-spaced grid. Walls are reflective: ghost
cells copy depth and tangential momentum and negate normal momentum, which
makes the wall mass flux exactly zero, so total depth is conserved up to
round-off.
"""
from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from dsovt import kernels
from dsovt.data import FieldSequence, write_tensor
from dsovt.errors import DivergenceError, ParameterRangeError, PlacementError, PositivityError
from dsovt.manifest import ExperimentManifest

log = logging.getLogger(__name__)

DELTA_H_RANGE = (0.2, 0.8)
RADIUS_RANGE = (4.0, 12.0)
CFL_LIMIT = 0.5


@dataclass(frozen=True)
class SWEState:
    h: np.ndarray
    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        if not (self.h.shape == self.u.shape == self.v.shape):
            raise ValueError("h, u, v must share one grid shape")

    @classmethod
    def from_conservative(cls, h, hu, hv):
        return cls(h, hu / h, hv / h)

    def conservative(self):
        return self.h, self.h * self.u, self.h * self.v

    def as_frame(self):
        """Channels in (u, v, h) order."""
        return np.stack([self.u, self.v, self.h], axis=-1)


@dataclass(frozen=True)
class SWEScenario:
    delta_h: float
    radius: float
    center: tuple = (31.5, 31.5)
    nx: int = 64
    ny: int = 64
    base_depth: float = 1.0
    g: float = 1.0
    dt: float = 0.1
    total_steps: int = 3500
    equilibrium_steps: int = 500
    snapshot_interval: int = 10
    seed: int = 0

    def __post_init__(self):
        lo, hi = DELTA_H_RANGE
        if not (lo <= self.delta_h <= hi or self.delta_h == 0.0):
            raise ParameterRangeError(f"delta_h={self.delta_h} outside [{lo}, {hi}]")
        lo, hi = RADIUS_RANGE
        if not lo <= self.radius <= hi:
            raise ParameterRangeError(f"radius={self.radius} outside [{lo}, {hi}]")
        if self.nx < 8 or self.ny < 8:
            raise ParameterRangeError("grid must be at least 8x8")
        cx, cy = self.center
        r = self.radius
        if not (r <= cx <= self.nx - 1 - r and r <= cy <= self.ny - 1 - r):
            raise PlacementError(
                f"center {self.center} is closer than radius {r} to the boundary of a {self.nx}x{self.ny} grid")
        if self.total_steps <= self.equilibrium_steps:
            raise ParameterRangeError("total_steps must exceed equilibrium_steps")
        if (self.total_steps - self.equilibrium_steps) % self.snapshot_interval:
            raise ParameterRangeError("recorded span must be a multiple of snapshot_interval")
        if self.cfl > CFL_LIMIT:
            raise ParameterRangeError(f"dt={self.dt} violates CFL: {self.cfl:.3f} > {CFL_LIMIT}")

    @property
    def cfl(self):
        return self.dt * math.sqrt(self.g * (self.base_depth + self.delta_h))

    @property
    def n_snapshots(self):
        return (self.total_steps - self.equilibrium_steps) // self.snapshot_interval

    def to_dict(self):
        d = asdict(self)
        d["center"] = list(self.center)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["center"] = tuple(d.get("center", (31.5, 31.5)))
        return cls(**d)


def init_disturbance(scenario):
    """Flat water at rest with a raised cylinder of height ``delta_h``."""
    i = np.arange(scenario.nx, dtype=np.float64)[:, None]
    j = np.arange(scenario.ny, dtype=np.float64)[None, :]
    cx, cy = scenario.center
    inside = (i - cx) ** 2 + (j - cy) ** 2 <= scenario.radius ** 2
    h = np.full((scenario.nx, scenario.ny), scenario.base_depth, dtype=np.float64)
    h[inside] += scenario.delta_h
    zeros = np.zeros_like(h)
    return SWEState(h, zeros, zeros.copy())


def _advance(h, hu, hv, scenario, nsteps, first_step=0):
    h, hu, hv, bad = kernels.lf_advance(h, hu, hv, scenario.dt, scenario.g, nsteps)
    if bad >= 0:
        step = first_step + bad
        if np.all(np.isfinite(h)) and np.isfinite(hu).all() and np.isfinite(hv).all():
            raise PositivityError(f"non-positive depth after step {step}", step=step)
        raise DivergenceError(f"non-finite state after step {step}", step=step)
    return h, hu, hv


def step(state, scenario, step_index=0):
    """One solver step from primitive state to primitive state."""
    h, hu, hv = _advance(*state.conservative(), scenario, 1, first_step=step_index)
    return SWEState.from_conservative(h, hu, hv)


def simulate(scenario):
    """Run the scenario; frames are (u, v, h) sampled after equilibration.

    Returns a FieldSequence of ``scenario.n_snapshots`` float32 frames
    (float64 state is kept during integration).
    """
    h, hu, hv = init_disturbance(scenario).conservative()
    h, hu, hv = _advance(h, hu, hv, scenario, scenario.equilibrium_steps)
    frames = np.empty((scenario.n_snapshots, scenario.nx, scenario.ny, 3), dtype=np.float32)
    done = scenario.equilibrium_steps
    for k in range(scenario.n_snapshots):
        h, hu, hv = _advance(h, hu, hv, scenario, scenario.snapshot_interval, first_step=done)
        done += scenario.snapshot_interval
        frames[k] = SWEState.from_conservative(h, hu, hv).as_frame()
    return FieldSequence(frames, dt_index=scenario.snapshot_interval)


def simulate_mass(scenario):
    """Total depth at t=0 and after ``total_steps`` (float64, for drift checks)."""
    h, hu, hv = init_disturbance(scenario).conservative()
    m0 = float(np.sum(h))
    h, _, _ = _advance(h, hu, hv, scenario, scenario.total_steps)
    return m0, float(np.sum(h))


def sample_scenario(sim_seed, template=None):
    """Draw delta_h, radius and a wall-respecting centre from ``sim_seed``."""
    template = template or {}
    rng = np.random.default_rng(sim_seed)
    nx = int(template.get("nx", 64))
    ny = int(template.get("ny", 64))
    delta_h = float(rng.uniform(*DELTA_H_RANGE))
    radius = float(rng.uniform(*RADIUS_RANGE))
    cx = float(rng.uniform(radius, nx - 1 - radius))
    cy = float(rng.uniform(radius, ny - 1 - radius))
    fields = {k: v for k, v in template.items() if k in SWEScenario.__dataclass_fields__}
    fields.update(delta_h=delta_h, radius=radius, center=(cx, cy), seed=int(sim_seed), nx=nx, ny=ny)
    return SWEScenario(**fields)


def _run_one(args):
    scenario, path = args
    write_tensor(path, simulate(scenario))
    return str(path)


def generate_dataset(out_dir, train_count=30, test_count=10, seed=0, solver=None, workers=1):
    """Simulate ``train_count + test_count`` random scenarios into ``out_dir``.

    Writes ``sim_%03d.dsvt`` files plus ``manifest.toml`` recording every
    sampled parameter and per-simulation seed; returns the manifest.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    solver = dict(solver or {})
    n = train_count + test_count
    rng = np.random.default_rng(seed)
    sim_seeds = rng.choice(2**31 - 1, size=n, replace=False)
    scenarios = [sample_scenario(int(s), solver) for s in sim_seeds]
    names = [f"sim_{k:03d}.dsvt" for k in range(n)]
    jobs = [(sc, out_dir / name) for sc, name in zip(scenarios, names)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_run_one, jobs))
    else:
        for job in jobs:
            log.info("simulating %s (delta_h=%.3f, radius=%.2f)", job[1].name, job[0].delta_h, job[0].radius)
            _run_one(job)
    base = scenarios[0] if scenarios else SWEScenario(0.5, 8.0)
    solver_params = {k: v for k, v in base.to_dict().items()
                     if k not in ("delta_h", "radius", "center", "seed")}
    sims = []
    for k, (sc, name) in enumerate(zip(scenarios, names)):
        sims.append({
            "file": name,
            "split": "train" if k < train_count else "test",
            "seed": sc.seed,
            "delta_h": sc.delta_h,
            "radius": sc.radius,
            "center": list(sc.center),
        })
    manifest = ExperimentManifest(
        seed=int(seed),
        dataset_paths=names,
        split={"train_count": train_count, "test_count": test_count},
        solver_params=solver_params,
        simulations=sims,
        base_dir=out_dir,
    )
    manifest.save(out_dir / "manifest.toml")
    return manifest


def scenario_from_record(record, solver_params):
    d = {k: v for k, v in solver_params.items() if k in SWEScenario.__dataclass_fields__}
    d.update(delta_h=record["delta_h"], radius=record["radius"], center=tuple(record["center"]),
             seed=record["seed"])
    return SWEScenario.from_dict(d)
