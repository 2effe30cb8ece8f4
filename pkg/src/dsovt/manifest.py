"""Experiment manifests stored as TOML.

A manifest is the single source of every effective setting for a run:
seed, dataset files, split, solver or ingestion settings, sensor, model and
training hyperparameters. Relative paths resolve against the manifest's
directory.
"""
from __future__ import annotations

import copy
import sys
from dataclasses import dataclass, field
from pathlib import Path

import tomli_w

from dsovt.errors import ManifestError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

TRAINING_DEFAULTS = {
    "s_in": 5,
    "s_out": 5,
    "lambda_energy": 0.0,
    "n_init": 50,
    "epochs": 100,
    "learning_rate": 1e-3,
    "batch_size": 16,
    "window_stride": 1,
}

SECTIONS = ("split", "solver_params", "ingestion_params", "sensor_spec", "model_spec",
            "training_spec", "evaluate")


@dataclass
class ExperimentManifest:
    seed: int | None = None
    dataset_paths: list = field(default_factory=list)
    split: dict = field(default_factory=dict)
    solver_params: dict = field(default_factory=dict)
    ingestion_params: dict = field(default_factory=dict)
    sensor_spec: dict = field(default_factory=dict)
    model_spec: dict = field(default_factory=dict)
    training_spec: dict = field(default_factory=dict)
    evaluate: dict = field(default_factory=dict)
    simulations: list = field(default_factory=list)
    base_dir: Path = field(default=Path("."), compare=False)

    def __post_init__(self):
        self.training_spec = {**TRAINING_DEFAULTS, **self.training_spec}

    # -- validation --------------------------------------------------------------------
    def validate(self, check_paths=True):
        t = self.training_spec
        if int(t["s_in"]) < 1 or int(t["s_out"]) < 1:
            raise ManifestError("training_spec.s_in and training_spec.s_out must be >= 1")
        if float(t["lambda_energy"]) < 0:
            raise ManifestError("training_spec.lambda_energy must be >= 0")
        if int(t["n_init"]) < 0:
            raise ManifestError("training_spec.n_init must be >= 0")
        for key in ("epochs", "batch_size", "window_stride"):
            if int(t[key]) < 1:
                raise ManifestError(f"training_spec.{key} must be >= 1")
        if float(t["learning_rate"]) <= 0:
            raise ManifestError("training_spec.learning_rate must be > 0")
        if self.split:
            for key in ("train_count", "test_count"):
                if int(self.split.get(key, -1)) < 0:
                    raise ManifestError(f"split.{key} missing or negative")
            if self.dataset_paths and self.split["train_count"] + self.split["test_count"] > len(self.dataset_paths):
                raise ManifestError("split counts exceed the number of dataset_paths")
        if check_paths:
            for p in self.dataset_paths:
                if not self.resolve(p).exists():
                    raise ManifestError(f"dataset path does not exist: {p}")
        return self

    def resolve(self, p):
        p = Path(p)
        return p if p.is_absolute() else self.base_dir / p

    @property
    def train_paths(self):
        n = int(self.split.get("train_count", len(self.dataset_paths)))
        return [self.resolve(p) for p in self.dataset_paths[:n]]

    @property
    def test_paths(self):
        n = int(self.split.get("train_count", 0))
        m = int(self.split.get("test_count", len(self.dataset_paths) - n))
        return [self.resolve(p) for p in self.dataset_paths[n:n + m]]

    # -- (de)serialization ------------------------------------------------------------
    def to_dict(self):
        out = {}
        if self.seed is not None:
            out["seed"] = int(self.seed)
        out["dataset_paths"] = [str(p) for p in self.dataset_paths]
        for name in SECTIONS:
            section = getattr(self, name)
            if section:
                out[name] = copy.deepcopy(section)
        if self.simulations:
            out["simulations"] = copy.deepcopy(self.simulations)
        return out

    @classmethod
    def from_dict(cls, d, base_dir="."):
        known = {"seed", "dataset_paths", "simulations", *SECTIONS}
        unknown = set(d) - known
        if unknown:
            raise ManifestError(f"unknown manifest keys: {sorted(unknown)}")
        kwargs = {k: copy.deepcopy(v) for k, v in d.items()}
        return cls(base_dir=Path(base_dir), **kwargs)

    def dumps(self):
        return tomli_w.dumps(self.to_dict())

    def save(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.dumps())
        return path

    def with_overrides(self, overrides):
        """Apply ``section.key=value`` overrides; values parse as TOML literals."""
        d = self.to_dict()
        for item in overrides:
            if "=" not in item:
                raise ManifestError(f"override must look like key=value: {item!r}")
            key, raw = item.split("=", 1)
            value = _parse_literal(raw.strip())
            parts = key.strip().split(".")
            node = d
            for part in parts[:-1]:
                node = node.setdefault(part, {})
                if not isinstance(node, dict):
                    raise ManifestError(f"cannot override inside non-table key {key!r}")
            node[parts[-1]] = value
        return ExperimentManifest.from_dict(d, base_dir=self.base_dir)


def _parse_literal(raw):
    try:
        return tomllib.loads(f"v = {raw}")["v"]
    except tomllib.TOMLDecodeError:
        return raw


def load_manifest(path, check_paths=True):
    path = Path(path)
    try:
        d = tomllib.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ManifestError(f"manifest not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ManifestError(f"{path}: {exc}") from exc
    return ExperimentManifest.from_dict(d, base_dir=path.parent).validate(check_paths=check_paths)
