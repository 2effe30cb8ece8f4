"""Losses and training loops for the CED, the latent LSTM and the ConvLSTM.

All three trainers share one loop: Adam, seeded per-epoch shuffling and a
per-epoch log of the data term, the energy term and their weighted total.
The physics term compares the mean total energy of the input window with
that of the predicted window, evaluated on denormalized fields.
"""
from __future__ import annotations

import contextlib
import copy
import csv
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F

from dsovt.data import Field, FieldSequence, NormStats
from dsovt.errors import ContractError, DivergenceError, ShapeError, ValidationError
from dsovt.models import (CED, CEDSpec, ConvLSTM, ConvLSTMSpec, LatentLSTM, LatentSeqSpec,
                          ModelBundle)

log = logging.getLogger(__name__)

GRAVITY = 1.0


# --- energy ---------------------------------------------------------------------------

def _sw_values(x):
    v = x.values if isinstance(x, (Field, FieldSequence)) else np.asarray(x, dtype=np.float64)
    if v.ndim < 3 or v.shape[-1] != 3:
        raise ShapeError(f"energy needs (u, v, h) channels last, got shape {v.shape}")
    return v.astype(np.float64, copy=False)


def energy(x, g=GRAVITY):
    """Total shallow-water energy sum(h(u^2+v^2)/2 + g h^2/2) over the grid.

    A single (nx, ny, 3) field gives a float; stacked fields give one value
    per leading index.
    """
    v = _sw_values(x)
    u, w, h = v[..., 0], v[..., 1], v[..., 2]
    e = (0.5 * h * (u * u + w * w) + 0.5 * g * h * h).sum(axis=(-2, -1))
    return float(e) if e.ndim == 0 else e


def energy_loss(inputs, outputs, g=GRAVITY):
    """|mean energy of the input window - mean energy of the output window|."""
    a, b = _sw_values(inputs), _sw_values(outputs)
    if a.ndim != 4 or b.ndim != 4:
        raise ShapeError("energy_loss expects (S, nx, ny, 3) windows")
    if a.shape[0] != b.shape[0]:
        raise ContractError(f"energy loss needs equal window lengths, got {a.shape[0]} and {b.shape[0]}")
    return float(abs(energy(a, g).mean() - energy(b, g).mean()))


def energy_torch(frames, g=GRAVITY):
    """Per-frame energy of channels-first physical frames (..., 3, nx, ny)."""
    u, v, h = frames[..., 0, :, :], frames[..., 1, :, :], frames[..., 2, :, :]
    return (0.5 * h * (u * u + v * v) + 0.5 * g * h * h).sum(dim=(-2, -1))


class Denormalizer:
    """Maps normalized channels-first tensors back to physical units."""

    def __init__(self, stats, dtype=torch.float32):
        self.lo = torch.as_tensor(stats.minimum, dtype=dtype).reshape(-1, 1, 1)
        self.span = torch.as_tensor(stats.span, dtype=dtype).reshape(-1, 1, 1)

    def __call__(self, x):
        return x * self.span + self.lo


# --- configuration and reporting -------------------------------------------------------

@dataclass
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 1e-3
    batch_size: int = 16
    seed: int = 0
    s_in: int = 5
    s_out: int = 5
    window_stride: int = 1
    physics: bool = False      # add the energy term to the loss
    lambda_energy: float = 0.0
    n_init: int = 0            # ConvLSTM: epochs trained on the data term only
    g: float = GRAVITY

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1 or self.window_stride < 1:
            raise ValidationError("epochs, batch_size and window_stride must be >= 1")
        if self.learning_rate <= 0:
            raise ValidationError("learning_rate must be > 0")
        if self.lambda_energy < 0 or self.n_init < 0:
            raise ValidationError("lambda_energy and n_init must be >= 0")

    @classmethod
    def from_training_spec(cls, spec, seed, **kw):
        keys = ("epochs", "learning_rate", "batch_size", "s_in", "s_out", "window_stride", "n_init")
        d = {k: spec[k] for k in keys if k in spec}
        d["lambda_energy"] = float(spec.get("lambda_energy", 0.0))
        d.update(kw)
        return cls(seed=int(seed), **d)


@dataclass
class TrainState:
    """Everything needed to continue a run after ``epoch``."""

    epoch: int
    module_state: dict
    optim_state: dict
    generator_state: torch.Tensor
    rows: list


@dataclass
class TrainReport:
    seed: int
    rows: list = field(default_factory=list)
    initial_loss: float | None = None
    switch_epoch: int | None = None
    params_path: str | None = None
    wall_s: float = 0.0
    warnings: list = field(default_factory=list)
    trajectory: list = field(default_factory=list)
    checkpoint: TrainState | None = None

    FIELDS = ("epoch", "data_term", "energy_term", "total", "wall_ms")

    def column(self, name):
        return [r[name] for r in self.rows]

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=self.FIELDS)
            w.writeheader()
            for r in self.rows:
                w.writerow({k: repr(r[k]) if isinstance(r[k], float) else r[k] for k in self.FIELDS})


# --- windows -----------------------------------------------------------------------------

def window_starts(t, s_in, s_out, stride=1):
    """Start indices of (input, target) windows inside one sequence of length t."""
    return list(range(0, t - s_in - s_out + 1, stride))


def window_index(lengths, s_in, s_out, stride=1):
    """(sequence, start) pairs; windows never straddle two sequences."""
    return [(k, i) for k, t in enumerate(lengths) for i in window_starts(t, s_in, s_out, stride)]


def _masked_mse(pred, target, mask):
    if mask is None:
        return F.mse_loss(pred, target)
    sq = (pred - target) ** 2 * mask
    return sq.sum() / (mask.sum() * (sq.numel() // mask.numel()))


def _mask_tensor(mask, nx, ny, dtype):
    if mask is None:
        return None
    m = np.asarray(mask, bool)
    if m.shape != (nx, ny):
        raise ShapeError(f"mask shape {m.shape} does not match grid {(nx, ny)}")
    return torch.as_tensor(m, dtype=dtype)


@contextlib.contextmanager
def channels_last(module):
    """Train convolutions in NHWC layout (markedly faster on CPU), then
    restore the standard layout; the conversion only moves memory."""
    module.to(memory_format=torch.channels_last)
    try:
        yield module
    finally:
        module.to(memory_format=torch.contiguous_format)


def _flat_params(module):
    return torch.cat([p.detach().reshape(-1).clone() for p in module.parameters()])


class _Loop:
    """Shared epoch loop. ``step_fn(batch_ids, epoch) -> (total, data, energy)``
    where energy is a tensor or None when the term is inactive."""

    def __init__(self, module, config, n_items, step_fn, report, trajectory=False,
                 checkpoint_at=None, resume=None, params=None):
        self.module = module
        self.cfg = config
        self.n = n_items
        self.step_fn = step_fn
        self.report = report
        self.trajectory = trajectory
        self.checkpoint_at = checkpoint_at
        self.params = list(params if params is not None else module.parameters())
        self.opt = torch.optim.Adam(self.params, lr=config.learning_rate, betas=(0.9, 0.999), eps=1e-8)
        self.gen = torch.Generator().manual_seed(int(config.seed))
        self.first_epoch = 1
        if resume is not None:
            module.load_state_dict(resume.module_state)
            self.opt.load_state_dict(resume.optim_state)
            self.gen.set_state(resume.generator_state)
            report.rows = copy.deepcopy(resume.rows)
            self.first_epoch = resume.epoch + 1

    def run(self):
        if self.n == 0:
            raise ContractError("no training windows: sequences are shorter than s_in + s_out")
        t_start = time.perf_counter()
        bs = self.cfg.batch_size
        for epoch in range(self.first_epoch, self.cfg.epochs + 1):
            t0 = time.perf_counter()
            perm = torch.randperm(self.n, generator=self.gen)
            sums = np.zeros(3)
            count = 0
            for b in range(0, self.n, bs):
                ids = perm[b:b + bs]
                self.opt.zero_grad(set_to_none=True)
                total, data, energy_term = self.step_fn(ids, epoch)
                if not torch.isfinite(total):
                    raise DivergenceError(f"non-finite loss at epoch {epoch}", step=epoch)
                total.backward()
                self.opt.step()
                w = len(ids)
                sums += w * np.array([float(data), 0.0 if energy_term is None else float(energy_term),
                                      float(total.detach())])
                count += w
            data_m, energy_m, total_m = sums / count
            self.report.rows.append({
                "epoch": epoch, "data_term": float(data_m), "energy_term": float(energy_m),
                "total": float(total_m), "wall_ms": (time.perf_counter() - t0) * 1e3,
            })
            log.info("epoch %d: data %.6g energy %.6g total %.6g", epoch, data_m, energy_m, total_m)
            self._guard(epoch)
            if self.trajectory:
                self.report.trajectory.append(_flat_params(self.module))
            if self.checkpoint_at == epoch:
                self.report.checkpoint = TrainState(
                    epoch, copy.deepcopy(self.module.state_dict()), copy.deepcopy(self.opt.state_dict()),
                    self.gen.get_state(), copy.deepcopy(self.report.rows))
        self.report.wall_s += time.perf_counter() - t_start
        return self.report

    def _guard(self, epoch):
        totals = self.report.column("total")
        if len(totals) >= 10 and np.mean(totals[-5:]) > np.mean(totals[-10:-5]):
            msg = f"epoch {epoch}: 5-epoch moving average of the loss increased"
            log.warning(msg)
            self.report.warnings.append(msg)


# --- CED ---------------------------------------------------------------------------------

def _stack_frames(arrays, dtype=torch.float32):
    return torch.cat([torch.as_tensor(np.asarray(a)).to(dtype).movedim(-1, -3) for a in arrays])


def _check_pairs(inputs, targets):
    if len(inputs) != len(targets):
        raise ShapeError(f"{len(inputs)} input sequences but {len(targets)} target sequences")
    for a, b in zip(inputs, targets):
        if np.shape(a) != np.shape(b):
            raise ShapeError(f"input sequence shape {np.shape(a)} differs from target {np.shape(b)}")


def train_ced(inputs, targets, spec, config, mask=None, module=None, trajectory=False):
    """Fit the CED to map tessellated frames to dense frames (both normalized).

    ``inputs``/``targets`` are lists of (T, nx, ny, nc) arrays. The report's
    ``initial_loss`` is the training-set MSE before the first update.
    """
    _check_pairs(inputs, targets)
    x = _stack_frames(inputs)
    y = _stack_frames(targets)
    model = module if module is not None else CED(spec, seed=config.seed)
    m = _mask_tensor(mask, spec.nx, spec.ny, x.dtype)
    report = TrainReport(seed=config.seed)
    report.initial_loss = _dataset_mse(model, x, y, m, config.batch_size)

    def step(ids, epoch):
        xb = x[ids].contiguous(memory_format=torch.channels_last)
        loss = _masked_mse(model(xb), y[ids], m)
        return loss, loss.detach(), None

    with channels_last(model):
        _Loop(model, config, len(x), step, report, trajectory=trajectory).run()
    return ModelBundle("ced", spec, model, {"seed": config.seed}), report


def _dataset_mse(model, x, y, mask, bs):
    total = 0.0
    count = 0
    with torch.no_grad():
        for b in range(0, len(x), bs):
            sq = (model(x[b:b + bs]).double() - y[b:b + bs].double()) ** 2
            if mask is not None:
                sq = sq * mask.double()
                count += int(mask.sum()) * sq.shape[0] * sq.shape[1]
            else:
                count += sq.numel()
            total += float(sq.sum())
    return total / count


def encode_sequences(ced, sequences, batch=64):
    """Latent sequences (T, Z) for a list of (T, nx, ny, nc) arrays."""
    m = ced.module if isinstance(ced, ModelBundle) else ced
    out = []
    with torch.no_grad():
        for seq in sequences:
            x = torch.as_tensor(np.asarray(seq)).float().movedim(-1, -3)
            out.append(torch.cat([m.encode(x[b:b + batch]) for b in range(0, len(x), batch)]).numpy())
    return out


# --- CED-LSTM ------------------------------------------------------------------------------

def window_energies(frames_phys, starts, s_in, g=GRAVITY):
    """Mean energy of each input window, from physical (T, nx, ny, 3) frames."""
    per_frame = energy(frames_phys, g)
    return np.array([per_frame[i:i + s_in].mean() for i in starts])


class _EnergyTerm:
    """Energy mismatch between precomputed input-window energies and
    predicted frames given normalized and channels-first."""

    def __init__(self, stats, g, dtype=torch.float32):
        self.denorm = Denormalizer(stats, dtype)
        self.g = g

    def __call__(self, e_in, frames):
        e_out = energy_torch(self.denorm(frames), self.g).mean(dim=1)
        return (e_in - e_out).abs().mean()


def train_ced_lstm(latents, ced, spec, config, stats=None, truth_phys=None, module=None,
                   trajectory=False):
    """Fit the latent LSTM on windows of latent sequences.

    With ``config.physics`` the loss is latent MSE + lambda * energy term,
    where predicted latents pass through the frozen CED decoder and
    ``truth_phys`` (physical (T, nx, ny, 3) frames aligned with ``latents``)
    supplies the input-window energies.
    """
    cfg = config
    if spec.s_in != cfg.s_in or spec.s_out != cfg.s_out:
        raise ContractError("LSTM spec and training config disagree on s_in/s_out")
    lat = [torch.as_tensor(np.asarray(z), dtype=torch.float32) for z in latents]
    for z in lat:
        if z.ndim != 2 or z.shape[1] != spec.latent:
            raise ShapeError(f"latent sequences must be (T, {spec.latent}), got {tuple(z.shape)}")
    index = window_index([len(z) for z in lat], cfg.s_in, cfg.s_out, cfg.window_stride)
    model = module if module is not None else LatentLSTM(spec, seed=cfg.seed)
    decoder = ced.module if isinstance(ced, ModelBundle) else ced
    xs = torch.stack([lat[k][i:i + cfg.s_in] for k, i in index]) if index else None
    ys = torch.stack([lat[k][i + cfg.s_in:i + cfg.s_in + cfg.s_out] for k, i in index]) if index else None

    term = None
    if cfg.physics:
        if stats is None or truth_phys is None:
            raise ContractError("physics training needs normalization stats and physical truth frames")
        if cfg.s_in != cfg.s_out:
            raise ContractError("the energy loss needs s_in == s_out")
        e_in = torch.as_tensor(np.array([window_energies(truth_phys[k], [i], cfg.s_in, cfg.g)[0]
                                         for k, i in index]), dtype=torch.float32)
        term = _EnergyTerm(stats, cfg.g)

    report = TrainReport(seed=cfg.seed)

    def step(ids, epoch):
        pred = model(xs[ids])
        data = F.mse_loss(pred, ys[ids])
        if term is None:
            return data, data.detach(), None
        b = len(ids)
        frames = decoder.decode(pred.reshape(b * cfg.s_out, -1)).reshape(b, cfg.s_out, *decoder_shape)
        en = term(e_in[ids], frames)
        return data + cfg.lambda_energy * en, data.detach(), en.detach()

    ds = decoder.spec
    decoder_shape = (ds.nc, ds.nx, ds.ny)
    frozen = [(p, p.requires_grad) for p in decoder.parameters()]
    for p, _ in frozen:
        p.requires_grad_(False)
    try:
        with channels_last(decoder):
            _Loop(model, cfg, len(index), step, report, trajectory=trajectory).run()
    finally:
        for p, flag in frozen:
            p.requires_grad_(flag)
    extra = {"seed": cfg.seed, "physics": cfg.physics, "lambda_energy": cfg.lambda_energy}
    return ModelBundle("lstm", spec, model, extra), report


# --- ConvLSTM ------------------------------------------------------------------------------

def train_convlstm(inputs, targets, spec, config, stats=None, truth_phys=None, mask=None,
                   module=None, trajectory=False, checkpoint_at=None, resume=None):
    """Fit the ConvLSTM on (tessellated input window -> dense target window).

    The energy term is active only for epochs after ``config.n_init`` and
    only when ``config.physics`` is set; before that it is logged as 0.0.
    ``checkpoint_at`` stores the full training state after that epoch in
    ``report.checkpoint``; ``resume`` continues from such a state.
    """
    cfg = config
    _check_pairs(inputs, targets)
    if spec.s_in != cfg.s_in or spec.s_out != cfg.s_out:
        raise ContractError("ConvLSTM spec and training config disagree on s_in/s_out")
    xin = [torch.as_tensor(np.asarray(a)).float().movedim(-1, -3) for a in inputs]
    tgt = [torch.as_tensor(np.asarray(a)).float().movedim(-1, -3) for a in targets]
    index = window_index([len(a) for a in xin], cfg.s_in, cfg.s_out, cfg.window_stride)
    model = module if module is not None else ConvLSTM(spec, seed=cfg.seed)
    m = _mask_tensor(mask, spec.nx, spec.ny, torch.float32)

    term = None
    if cfg.physics:
        if stats is None or truth_phys is None:
            raise ContractError("physics training needs normalization stats and physical truth frames")
        if cfg.s_in != cfg.s_out:
            raise ContractError("the energy loss needs s_in == s_out")
        e_in = torch.as_tensor(np.array([window_energies(truth_phys[k], [i], cfg.s_in, cfg.g)[0]
                                         for k, i in index]), dtype=torch.float32)
        term = _EnergyTerm(stats, cfg.g)

    def batch(ids):
        pairs = [index[int(n)] for n in ids]
        x = torch.stack([xin[k][i:i + cfg.s_in] for k, i in pairs])
        y = torch.stack([tgt[k][i + cfg.s_in:i + cfg.s_in + cfg.s_out] for k, i in pairs])
        return x, y

    def step(ids, epoch):
        x, y = batch(ids)
        pred = model(x)
        data = _masked_mse(pred, y, m)
        if term is None or epoch <= cfg.n_init:
            return data, data.detach(), None
        en = term(e_in[ids], pred)
        return data + cfg.lambda_energy * en, data.detach(), en.detach()

    report = TrainReport(seed=cfg.seed)
    if cfg.physics:
        report.switch_epoch = cfg.n_init + 1
    _Loop(model, cfg, len(index), step, report, trajectory=trajectory,
          checkpoint_at=checkpoint_at, resume=resume).run()
    extra = {"seed": cfg.seed, "physics": cfg.physics, "lambda_energy": cfg.lambda_energy,
             "n_init": cfg.n_init}
    return ModelBundle("convlstm", spec, model, extra), report


# --- gradient check ------------------------------------------------------------------------

LOSS_IDS = ("ced_mse", "ced_lstm_composite", "convlstm_composite")
_TINY_STATS = NormStats([-0.2, -0.2, 0.8], [0.2, 0.2, 1.6])


def _tiny_problem(loss_id, seed, lambda_energy):
    """Build a float64 tiny model and a closure returning its scalar loss."""
    gen = torch.Generator().manual_seed(seed)
    rand = lambda *s: torch.rand(*s, generator=gen, dtype=torch.float64)
    term = _EnergyTerm(_TINY_STATS, GRAVITY, torch.float64)
    if loss_id == "ced_mse":
        model = CED(CEDSpec(8, 8, 3, latent=4), seed=seed).double()
        x, y = rand(2, 3, 8, 8), rand(2, 3, 8, 8)
        return model, lambda: F.mse_loss(model(x), y), _ced_pattern_fn(model, lambda: model(x))
    if loss_id == "ced_lstm_composite":
        ced = CED(CEDSpec(8, 8, 3, latent=4), seed=seed + 1).double()
        for p in ced.parameters():
            p.requires_grad_(False)
        model = LatentLSTM(LatentSeqSpec(4, s_in=2, s_out=2, layers=2, hidden=6), seed=seed).double()
        with torch.no_grad():  # nonzero biases so every parameter carries gradient
            for p in model.parameters():
                if p.dim() == 1:
                    p.copy_(0.2 * rand(*p.shape) - 0.1)
        x, y = rand(2, 2, 4), rand(2, 2, 4)
        e_in = energy_torch(term.denorm(rand(2, 2, 3, 8, 8))).mean(dim=1) * 1.1

        def loss():
            pred = model(x)
            frames = ced.decode(pred.reshape(4, 4)).reshape(2, 2, 3, 8, 8)
            return F.mse_loss(pred, y) + lambda_energy * term(e_in, frames)
        return model, loss, _ced_pattern_fn(ced, lambda: ced.decode(model(x).reshape(4, 4)))
    if loss_id == "convlstm_composite":
        spec = ConvLSTMSpec(8, 8, 3, s_in=2, s_out=2, layers=2, filters=4, kernel=3)
        model = ConvLSTM(spec, seed=seed).double()
        with torch.no_grad():
            for p in model.parameters():
                if p.dim() == 1:
                    p.copy_(0.2 * rand(*p.shape) - 0.1)
        x, y = rand(2, 2, 3, 8, 8), rand(2, 2, 3, 8, 8)
        e_in = energy_torch(term.denorm(x)).mean(dim=1) * 1.1

        def loss():
            pred = model(x)
            return F.mse_loss(pred, y) + lambda_energy * term(e_in, pred)
        return model, loss, _output_relu_pattern(model, x)
    raise ValidationError(f"unknown loss id {loss_id!r}; choose from {LOSS_IDS}")


def _ced_pattern_fn(ced, run):
    """Closure returning the CED's piecewise-linear pattern for one forward:
    the sign of every ReLU input and the winning cell of every max-pool."""
    pooled = {"enc1", "enc2", "enc3"}

    def pattern():
        seen = []

        def hook(mod, _inp, out, name=None):
            seen.append(out > 0)
            if mod in pool_mods:
                seen.append(F.max_pool2d(F.relu(out), 2, return_indices=True)[1])
        pool_mods = {getattr(ced, n) for n in pooled}
        handles = [m.register_forward_hook(hook) for m in ced.modules()
                   if isinstance(m, (torch.nn.Conv2d, torch.nn.Linear))]
        try:
            with torch.no_grad():
                run()
        finally:
            for h in handles:
                h.remove()
        return seen
    return pattern


def _output_relu_pattern(model, x):
    """Sign pattern of the ConvLSTM's nonnegative output channels."""
    relu_ch = [c for c, k in enumerate(model.spec.activation) if k != "tanh"]

    def pattern():
        seen = []
        h = model.head.register_forward_hook(lambda m, i, out: seen.append(out[:, relu_ch] > 0))
        try:
            with torch.no_grad():
                model(x)
        finally:
            h.remove()
        return seen
    return pattern


def _same(a, b):
    return len(a) == len(b) and all(torch.equal(p, q) for p, q in zip(a, b))


@dataclass
class GradCheckResult:
    max_rel_error: float
    checked: int
    skipped: int   # entries whose +-step probe crosses a ReLU or max-pool switch


def grad_check(loss_id, seed=0, lambda_energy=1e-3, step=1e-4, max_per_tensor=None, atol=1e-6):
    """Worst relative error between autograd and central differences."""
    return grad_check_details(loss_id, seed, lambda_energy, step, max_per_tensor, atol).max_rel_error


def grad_check_details(loss_id, seed=0, lambda_energy=1e-3, step=1e-4, max_per_tensor=None, atol=1e-6):
    """Compare autograd against central differences in float64.

    Every parameter tensor is checked; ``max_per_tensor`` limits how many of
    its entries are perturbed (chosen at random), which keeps the CED case
    tractable. The relative error of one entry is
    ``|a - n| / max(|a|, |n|, atol)``. The loss is piecewise smooth, so a
    probe whose ReLU signs or max-pool winners differ from the base point is
    not a valid difference quotient; such entries are counted as skipped.
    """
    model, loss_fn, pattern = _tiny_problem(loss_id, seed, lambda_energy)
    params = [p for p in model.parameters() if p.requires_grad]
    model.zero_grad()
    loss_fn().backward()
    base = pattern()
    rng = np.random.default_rng(seed)
    worst = 0.0
    checked = skipped = 0
    with torch.no_grad():
        for p in params:
            flat = p.view(-1)
            grad = p.grad.view(-1)
            ids = np.arange(flat.numel())
            if max_per_tensor is not None and ids.size > max_per_tensor:
                ids = rng.choice(ids, size=max_per_tensor, replace=False)
            for n in ids:
                old = flat[n].item()
                flat[n] = old + step
                up = loss_fn().item()
                smooth = _same(pattern(), base)
                flat[n] = old - step
                down = loss_fn().item()
                smooth = smooth and _same(pattern(), base)
                flat[n] = old
                if not smooth:
                    skipped += 1
                    continue
                num = (up - down) / (2 * step)
                ana = grad[n].item()
                worst = max(worst, abs(ana - num) / max(abs(ana), abs(num), atol))
                checked += 1
    return GradCheckResult(worst, checked, skipped)


def save_report(report, path):
    path = Path(path)
    report.write_csv(path)
    return path
