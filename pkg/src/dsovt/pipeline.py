"""End-to-end experiment stages driven by a manifest.

simulate -> sensors -> tessellate -> normalize -> train. Every stage derives
its randomness from the manifest seed, so the same manifest always yields the
same data and models. Trained artifacts can be memoized on disk by
:class:`StageCache`, keyed by the stage settings and the source of the
modules that produce them.
"""
from __future__ import annotations

import hashlib
import inspect
import json
import logging
import os
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from dsovt import data as data_mod
from dsovt.data import NormStats, normalize, read_tensor
from dsovt.errors import ManifestError
from dsovt.manifest import ExperimentManifest, load_manifest
from dsovt.models import (CEDSpec, ConvLSTMSpec, LatentSeqSpec, ModelBundle, load_model,
                          save_model)
from dsovt.sensors import sample_sensors_jittered, sample_sensors_random, tessellate_series
from dsovt.swe import generate_dataset
from dsovt.training import (TrainConfig, TrainReport, encode_sequences, train_ced, train_ced_lstm,
                            train_convlstm)

log = logging.getLogger(__name__)

_SRC = Path(__file__).resolve().parent
# modules whose code determines simulated data and trained parameters
_DATA_SOURCES = ("data.py", "swe.py", "_pykernels.py", "_ckernels.pyx")
_MODEL_SOURCES = _DATA_SOURCES + ("sensors.py", "models.py", "training.py")


def source_digest(names):
    h = hashlib.sha256()
    for name in names:
        h.update(name.encode())
        h.update((_SRC / name).read_bytes())
    return h.hexdigest()


def _stage_sources():
    """Digest of the model-producing modules plus this module's stage code."""
    fns = (derived_seed, sample_sensors, prepare_data, load_sequences, ced_spec, lstm_spec,
           convlstm_spec, train_config, ced_frames, latents_for, fit_ced, fit_ced_lstm,
           fit_convlstm_pair)
    h = hashlib.sha256(source_digest(_MODEL_SOURCES).encode())
    for fn in fns:
        h.update(inspect.getsource(fn).encode())
    return h.hexdigest()


def params_digest(bundle):
    h = hashlib.sha256()
    for name, t in bundle.module.state_dict().items():
        h.update(name.encode())
        h.update(t.detach().contiguous().numpy().tobytes())
    return h.hexdigest()


def _digest(obj):
    return hashlib.sha256(json.dumps(obj, sort_keys=True, default=str).encode()).hexdigest()


def derived_seed(seed, *path):
    """Independent 31-bit seed for one (stage, index) path below ``seed``."""
    return int(np.random.SeedSequence([int(seed), *[int(p) for p in path]]).generate_state(1)[0] >> 1)


# --- data ---------------------------------------------------------------------------------

@dataclass
class SimData:
    name: str
    truth: np.ndarray       # (T, nx, ny, nc) physical
    truth_norm: np.ndarray  # (T, nx, ny, nc) normalized, float32
    tess_norm: np.ndarray   # (T, nx, ny, nc) normalized Voronoi fields, float32
    sensors: object         # SensorSeries with physical values

    def sensor_frame(self, t, stats):
        """(positions, normalized values) observed at frame ``t``."""
        f = self.sensors[t]
        return f.positions, normalize(f.values, stats)[0]


@dataclass
class PreparedData:
    stats: NormStats
    train: list
    test: list
    mask: np.ndarray

    @property
    def shape(self):
        return self.train[0].truth.shape[1:] if self.train else self.test[0].truth.shape[1:]


def sample_sensors(seq, spec, seed):
    kind = spec.get("kind", "jittered")
    if kind == "jittered":
        return sample_sensors_jittered(seq, int(spec.get("base_count", 100)), int(spec.get("jitter", 2)), seed)
    if kind == "random":
        return sample_sensors_random(seq, int(spec["k"]), seed)
    raise ManifestError(f"sensor_spec.kind must be 'jittered' or 'random', got {kind!r}")


def require_seed(manifest):
    if manifest.seed is None:
        raise ManifestError("no seed: pass --seed, set DSOVT_SEED or add seed to the manifest")
    return int(manifest.seed)


def load_sequences(manifest, paths):
    ing = manifest.ingestion_params
    seqs, masks = [], []
    for p in paths:
        if ing:
            seq, mask = data_mod.ingest_grid_series(p, ing.get("mask_value"), int(ing.get("nc", 1)))
        else:
            seq, mask = read_tensor(p), None
        seqs.append(np.asarray(seq.values))
        masks.append(mask)
    return seqs, masks


def prepare_data(manifest):
    """Load both splits, place sensors, tessellate and normalize.

    Normalization statistics come from the training truth only.
    """
    seed = require_seed(manifest)
    train_paths, test_paths = manifest.train_paths, manifest.test_paths
    train_raw, train_masks = load_sequences(manifest, train_paths)
    test_raw, test_masks = load_sequences(manifest, test_paths)
    mask = None
    for m in train_masks + test_masks:
        if m is not None:
            mask = m if mask is None else (mask & m)
    if not train_raw:
        raise ManifestError("split.train_count selects no training data")
    stats = NormStats.from_values(np.concatenate(train_raw), mask)
    spec = manifest.sensor_spec
    sims = []
    for k, (path, raw) in enumerate(zip(train_paths + test_paths, train_raw + test_raw)):
        sensors = sample_sensors(raw, spec, derived_seed(seed, 1, k))
        nx, ny = raw.shape[1:3]
        tess = tessellate_series(sensors, nx, ny, dtype=np.float64)
        sims.append(SimData(
            name=Path(path).name,
            truth=raw,
            truth_norm=normalize(raw, stats)[0].astype(np.float32),
            tess_norm=normalize(tess, stats)[0].astype(np.float32),
            sensors=sensors,
        ))
    if mask is None:
        mask = np.ones(train_raw[0].shape[1:3], bool)
    return PreparedData(stats, sims[:len(train_raw)], sims[len(train_raw):], mask)


def ensure_dataset(manifest, root):
    """Simulate the manifest's dataset under ``root`` unless an identical one
    exists; returns the manifest with dataset paths filled in."""
    seed = require_seed(manifest)
    split = manifest.split
    key = _digest({"seed": seed, "split": split, "solver": manifest.solver_params,
                   "src": source_digest(_DATA_SOURCES)})[:16]
    out = Path(root) / f"dataset-{key}"
    if not (out / "manifest.toml").exists():
        generate_dataset(out, int(split["train_count"]), int(split["test_count"]), seed,
                         manifest.solver_params)
    generated = load_manifest(out / "manifest.toml")
    d = manifest.to_dict()
    d["dataset_paths"] = [str(out / p) for p in generated.dataset_paths]
    d["simulations"] = generated.simulations
    d["solver_params"] = generated.solver_params
    return ExperimentManifest.from_dict(d, base_dir=manifest.base_dir)


# --- specs and configs ----------------------------------------------------------------

def ced_spec(manifest, shape):
    m = manifest.model_spec
    nx, ny, nc = shape
    kw = {"activation": tuple(m["activation"])} if "activation" in m else {}
    return CEDSpec(nx, ny, nc, latent=int(m.get("latent", 128)), **kw)


def lstm_spec(manifest):
    m, t = manifest.model_spec, manifest.training_spec
    return LatentSeqSpec(int(m.get("latent", 128)), int(t["s_in"]), int(t["s_out"]),
                         int(m.get("lstm_layers", 2)), int(m.get("lstm_hidden", 256)))


def convlstm_spec(manifest, shape):
    m, t = manifest.model_spec, manifest.training_spec
    nx, ny, nc = shape
    kw = {"activation": tuple(m["activation"])} if "activation" in m else {}
    return ConvLSTMSpec(nx, ny, nc, int(t["s_in"]), int(t["s_out"]), int(m.get("convlstm_layers", 2)),
                        int(m.get("convlstm_filters", 64)), int(m.get("convlstm_kernel", 3)), **kw)


def train_config(manifest, family, seed, physics=False):
    """Training settings for one model family: top-level ``training_spec``
    keys, overridden by the ``training_spec.<family>`` table."""
    spec = {k: v for k, v in manifest.training_spec.items() if not isinstance(v, dict)}
    spec.update(manifest.training_spec.get(family, {}))
    return TrainConfig.from_training_spec(spec, seed, physics=physics)


def ced_frames(manifest, sims):
    stride = int(manifest.training_spec.get("ced", {}).get("frame_stride", 1))
    return [s.tess_norm[::stride] for s in sims], [s.truth_norm[::stride] for s in sims]


# --- stage cache ---------------------------------------------------------------------------

def default_cache_dir():
    return Path(os.environ.get("DSOVT_CACHE", Path.home() / ".cache" / "dsovt"))


def _report_to_json(r):
    return {"seed": r.seed, "rows": r.rows, "initial_loss": r.initial_loss, "switch_epoch": r.switch_epoch,
            "wall_s": r.wall_s, "warnings": r.warnings}


def _report_from_json(d):
    return TrainReport(seed=d["seed"], rows=d["rows"], initial_loss=d["initial_loss"],
                       switch_epoch=d["switch_epoch"], wall_s=d["wall_s"], warnings=d["warnings"])


class StageCache:
    """Stores (model, report) pairs under ``root/<stage>-<key>``.

    ``root=None`` disables caching.
    """

    def __init__(self, root=None):
        self.root = Path(root) if root is not None else None

    def run(self, stage, key, fn):
        """Return cached ``[(bundle, report), ...]`` or compute them with ``fn``."""
        if self.root is None:
            return fn()
        d = self.root / f"{stage}-{_digest(key)[:20]}"
        index = d / "index.json"
        if index.exists():
            names = json.loads(index.read_text())
            log.info("cache hit %s", d)
            return [(load_model(d / f"{n}.dsvm"),
                     _report_from_json(json.loads((d / f"{n}.json").read_text()))) for n in names]
        out = fn()
        d.mkdir(parents=True, exist_ok=True)
        names = [f"part{k}" for k in range(len(out))]
        for n, (bundle, report) in zip(names, out):
            save_model(bundle, d / f"{n}.dsvm")
            (d / f"{n}.json").write_text(json.dumps(_report_to_json(report)))
        (d / "key.json").write_text(json.dumps(key, sort_keys=True, default=str, indent=1))
        index.write_text(json.dumps(names))
        # reload so cached and fresh runs hand back identical float32 models
        return [(load_model(d / f"{n}.dsvm"), r) for n, (_, r) in zip(names, out)]


def _stage_key(manifest, stage, seed, **extra):
    return {"stage": stage, "seed": seed, "dataset": [str(p) for p in manifest.dataset_paths],
            "split": manifest.split, "sensor": manifest.sensor_spec, "model": manifest.model_spec,
            "training": manifest.training_spec, "ingestion": manifest.ingestion_params,
            "src": _stage_sources(), **extra}


# --- training stages ---------------------------------------------------------------------

def fit_ced(manifest, data, seed=None, cache=None):
    seed = require_seed(manifest) if seed is None else int(seed)
    cache = cache or StageCache()

    def run():
        cfg = train_config(manifest, "ced", seed)
        x, y = ced_frames(manifest, data.train)
        bundle, report = train_ced(x, y, ced_spec(manifest, data.shape), cfg, mask=_mask_or_none(data))
        bundle.extra["norm"] = data.stats.to_dict()
        return [(bundle, report)]
    return cache.run("ced", _stage_key(manifest, "ced", seed), run)[0]


def _mask_or_none(data):
    return None if data.mask.all() else data.mask


def latents_for(ced, sims):
    return encode_sequences(ced, [s.tess_norm for s in sims])


def fit_ced_lstm(manifest, data, ced, seed=None, physics=False, cache=None):
    seed = require_seed(manifest) if seed is None else int(seed)
    cache = cache or StageCache()

    def run():
        cfg = train_config(manifest, "lstm", seed, physics=physics)
        lat = latents_for(ced, data.train)
        bundle, report = train_ced_lstm(lat, ced, lstm_spec(manifest), cfg, stats=data.stats,
                                        truth_phys=[s.truth for s in data.train])
        return [(bundle, report)]
    key = _stage_key(manifest, "lstm", seed, physics=physics, ced=params_digest(ced))
    return cache.run("lstm", key, run)[0]


def fit_convlstm_pair(manifest, data, seed=None, cache=None):
    """Basic and physics-constrained ConvLSTMs sharing their first n_init epochs.

    Both runs are identical until the energy term switches on, so the
    physics run resumes from the basic run's state after epoch n_init.
    """
    seed = require_seed(manifest) if seed is None else int(seed)
    cache = cache or StageCache()

    def run():
        spec = convlstm_spec(manifest, data.shape)
        basic_cfg = train_config(manifest, "convlstm", seed)
        phys_cfg = train_config(manifest, "convlstm", seed, physics=True)
        x = [s.tess_norm for s in data.train]
        y = [s.truth_norm for s in data.train]
        mask = _mask_or_none(data)
        n_init = phys_cfg.n_init
        at = n_init if 0 < n_init < basic_cfg.epochs else None
        basic, basic_rep = train_convlstm(x, y, spec, basic_cfg, mask=mask, checkpoint_at=at)
        resume = basic_rep.checkpoint
        basic_rep.checkpoint = None
        phys, phys_rep = train_convlstm(x, y, spec, phys_cfg, stats=data.stats,
                                        truth_phys=[s.truth for s in data.train], mask=mask,
                                        resume=resume)
        if resume is not None:
            # epochs up to n_init were shared; report their timings honestly as reused
            phys_rep.warnings.append(f"epochs 1..{n_init} reused from the basic run")
        return [(basic, basic_rep), (phys, phys_rep)]
    pair = cache.run("convlstm", _stage_key(manifest, "convlstm", seed), run)
    return pair[0], pair[1]


__all__ = [
    "SimData", "PreparedData", "prepare_data", "ensure_dataset", "train_config", "fit_ced",
    "fit_ced_lstm", "fit_convlstm_pair", "StageCache", "derived_seed", "source_digest",
    "ced_spec", "lstm_spec", "convlstm_spec", "ModelBundle",
]
