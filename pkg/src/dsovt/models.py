"""Network architectures and the model file format.

Tensors inside the networks are channels-first, ``(batch, nc, nx, ny)``;
the numpy helpers at the bottom accept the package's ``(..., nx, ny, nc)``
layout and convert.
"""
from __future__ import annotations

import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
import torch
from torch import nn
import torch.nn.functional as F

from dsovt.errors import CompatibilityError, FormatError, ShapeError, ValidationError

ACTIVATIONS = ("tanh", "relu", "clamp")
SW_ACTIVATION = ("tanh", "tanh", "relu")


def _check_activation(kinds, nc):
    kinds = tuple(kinds)
    if len(kinds) != nc:
        raise ValidationError(f"activation lists {len(kinds)} channels, model has {nc}")
    unknown = set(kinds) - set(ACTIVATIONS)
    if unknown:
        raise ValidationError(f"unknown activation kinds {sorted(unknown)}; choose from {ACTIVATIONS}")
    return kinds


@dataclass(frozen=True)
class CEDSpec:
    nx: int
    ny: int
    nc: int
    latent: int = 128
    activation: tuple = SW_ACTIVATION

    def __post_init__(self):
        if self.nx % 8 or self.ny % 8:
            raise ShapeError(f"CED grid {self.nx}x{self.ny} must be divisible by 8")
        object.__setattr__(self, "activation", _check_activation(self.activation, self.nc))


@dataclass(frozen=True)
class LatentSeqSpec:
    latent: int
    s_in: int = 5
    s_out: int = 5
    layers: int = 2
    hidden: int = 256

    def __post_init__(self):
        if self.s_in < 1 or self.s_out < 1:
            raise ValidationError("s_in and s_out must be >= 1")


@dataclass(frozen=True)
class ConvLSTMSpec:
    nx: int
    ny: int
    nc: int
    s_in: int = 5
    s_out: int = 5
    layers: int = 2
    filters: int = 64
    kernel: int = 3
    activation: tuple = SW_ACTIVATION

    def __post_init__(self):
        if self.s_in < 1 or self.s_out < 1:
            raise ValidationError("s_in and s_out must be >= 1")
        if self.kernel % 2 == 0:
            raise ValidationError("kernel size must be odd for same padding")
        object.__setattr__(self, "activation", _check_activation(self.activation, self.nc))


SPECS = {"ced": CEDSpec, "lstm": LatentSeqSpec, "convlstm": ConvLSTMSpec}


class ChannelActivation(nn.Module):
    """Per-channel output nonlinearity on a (B, C, ...) tensor.

    ``tanh`` bounds a channel to [-1, 1], ``relu`` keeps it nonnegative and
    ``clamp`` is linear inside [0, 1] and clipped outside.
    """

    def __init__(self, kinds):
        super().__init__()
        self.kinds = tuple(kinds)

    def forward(self, x):
        parts = []
        for c, kind in enumerate(self.kinds):
            xc = x[:, c:c + 1]
            if kind == "tanh":
                parts.append(torch.tanh(xc))
            elif kind == "relu":
                parts.append(F.relu(xc))
            else:
                parts.append(torch.clamp(xc, 0.0, 1.0))
        return torch.cat(parts, dim=1)


def init_params(module, seed):
    """Glorot-uniform weights and zero biases, drawn from a seeded generator."""
    gen = torch.Generator().manual_seed(int(seed))
    for name, p in module.named_parameters():
        with torch.no_grad():
            if p.dim() >= 2:
                nn.init.xavier_uniform_(p, generator=gen)
            else:
                p.zero_()
    return module


class CED(nn.Module):
    """Convolutional encoder-decoder: three conv/pool stages down to a dense
    latent vector and the mirrored conv/upsample stages back."""

    def __init__(self, spec, seed=0):
        super().__init__()
        self.spec = spec
        nc, z = spec.nc, spec.latent
        self.bottleneck = (128, spec.nx // 8, spec.ny // 8)
        flat = int(np.prod(self.bottleneck))
        self.enc1 = nn.Conv2d(nc, 32, 3, padding=1)
        self.enc2 = nn.Conv2d(32, 64, 3, padding=1)
        self.enc3 = nn.Conv2d(64, 128, 3, padding=1)
        self.enc_dense = nn.Linear(flat, z)
        self.dec_dense = nn.Linear(z, flat)
        self.dec1 = nn.Conv2d(128, 128, 3, padding=1)
        self.dec2 = nn.Conv2d(128, 64, 3, padding=1)
        self.dec3 = nn.Conv2d(64, 32, 3, padding=1)
        self.dec4 = nn.Conv2d(32, nc, 3, padding=1)
        self.out_act = ChannelActivation(spec.activation)
        init_params(self, seed)

    def encode(self, x, trace=None):
        steps = [
            ("conv1", lambda t: F.relu(self.enc1(t))), ("pool1", lambda t: F.max_pool2d(t, 2)),
            ("conv2", lambda t: F.relu(self.enc2(t))), ("pool2", lambda t: F.max_pool2d(t, 2)),
            ("conv3", lambda t: F.relu(self.enc3(t))), ("pool3", lambda t: F.max_pool2d(t, 2)),
            ("flatten", lambda t: t.flatten(1)), ("dense", lambda t: F.relu(self.enc_dense(t))),
        ]
        return _run(steps, x, trace)

    def decode(self, h, trace=None):
        steps = [
            ("dense", lambda t: F.relu(self.dec_dense(t))),
            ("reshape", lambda t: t.reshape(-1, *self.bottleneck)),
            ("conv1", lambda t: F.relu(self.dec1(t))), ("up1", lambda t: F.interpolate(t, scale_factor=2)),
            ("conv2", lambda t: F.relu(self.dec2(t))), ("up2", lambda t: F.interpolate(t, scale_factor=2)),
            ("conv3", lambda t: F.relu(self.dec3(t))), ("up3", lambda t: F.interpolate(t, scale_factor=2)),
            ("conv4", lambda t: self.out_act(self.dec4(t))),
        ]
        return _run(steps, h, trace)

    def forward(self, x):
        return self.decode(self.encode(x))


def _run(steps, x, trace):
    for name, fn in steps:
        x = fn(x)
        if trace is not None:
            trace.append((name, tuple(x.shape[1:])))
    return x


class LatentLSTM(nn.Module):
    """Sequence-to-sequence LSTM on latent vectors.

    The encoder consumes the input window; its final state seeds a decoder
    that unrolls ``s_out`` steps, feeding back its own predictions (the
    first decoder input is the last observed latent).
    """

    def __init__(self, spec, seed=0):
        super().__init__()
        self.spec = spec
        self.encoder = nn.LSTM(spec.latent, spec.hidden, spec.layers, batch_first=True)
        self.decoder = nn.LSTM(spec.latent, spec.hidden, spec.layers, batch_first=True)
        self.head = nn.Linear(spec.hidden, spec.latent)
        init_params(self, seed)

    def forward(self, x):
        _, state = self.encoder(x)
        inp = x[:, -1:]
        outs = []
        for _ in range(self.spec.s_out):
            y, state = self.decoder(inp, state)
            inp = self.head(y)
            outs.append(inp)
        return torch.cat(outs, dim=1)


class ConvLSTMCell(nn.Module):
    def __init__(self, in_ch, filters, kernel):
        super().__init__()
        self.filters = filters
        self.gates = nn.Conv2d(in_ch + filters, 4 * filters, kernel, padding=kernel // 2)

    def forward(self, x, state):
        h, c = state
        i, f, o, g = self.gates(torch.cat([x, h], dim=1)).chunk(4, dim=1)
        c = torch.sigmoid(f) * c + torch.sigmoid(i) * torch.tanh(g)
        h = torch.sigmoid(o) * torch.tanh(c)
        return h, c


class ConvLSTM(nn.Module):
    """Stacked ConvLSTM; after the input window it keeps unrolling, turning
    the top hidden state into a frame with a 1x1 conv head at every output
    step and feeding that frame back as the next input."""

    def __init__(self, spec, seed=0):
        super().__init__()
        self.spec = spec
        chans = [spec.nc] + [spec.filters] * spec.layers
        self.cells = nn.ModuleList(
            ConvLSTMCell(chans[k], spec.filters, spec.kernel) for k in range(spec.layers))
        self.head = nn.Conv2d(spec.filters, spec.nc, 1)
        self.out_act = ChannelActivation(spec.activation)
        init_params(self, seed)

    def _step(self, x, states):
        new = []
        for cell, st in zip(self.cells, states):
            x, c = cell(x, st)
            new.append((x, c))
        return x, new

    def forward(self, x):
        b, _, _, nx, ny = x.shape
        zeros = x.new_zeros(b, self.spec.filters, nx, ny)
        states = [(zeros, zeros) for _ in self.cells]
        for t in range(x.shape[1]):
            top, states = self._step(x[:, t], states)
        outs = []
        for _ in range(self.spec.s_out):
            frame = self.out_act(self.head(top))
            outs.append(frame)
            top, states = self._step(frame, states)
        return torch.stack(outs, dim=1)


MODULES = {"ced": CED, "lstm": LatentLSTM, "convlstm": ConvLSTM}


def build_model(kind, spec, seed=0):
    return MODULES[kind](spec, seed=seed)


def zero_params(module):
    with torch.no_grad():
        for p in module.parameters():
            p.zero_()
    return module


def count_params(module):
    return sum(p.numel() for p in module.parameters())


# --- model files -------------------------------------------------------------------------

MODEL_MAGIC = b"DSVM"
MODEL_VERSION = 1
_MODEL_HEADER = struct.Struct("<4sB3xI")  # magic, version, pad, header length


@dataclass
class ModelBundle:
    kind: str
    spec: object
    module: nn.Module
    extra: dict = field(default_factory=dict)


def save_model(bundle, path):
    """Spec header (JSON text) followed by float32 LE parameters in layer order,
    weight before bias within each layer."""
    state = bundle.module.state_dict()
    params = [{"name": k, "shape": list(v.shape)} for k, v in state.items()]
    spec = asdict(bundle.spec)
    header = json.dumps({"kind": bundle.kind, "spec": spec, "params": params, "extra": bundle.extra},
                        sort_keys=True).encode()
    payload = b"".join(v.detach().cpu().numpy().astype("<f4").tobytes() for v in state.values())
    Path(path).write_bytes(_MODEL_HEADER.pack(MODEL_MAGIC, MODEL_VERSION, len(header)) + header + payload)


def load_model(path, expect_kind=None, expect=None):
    """Load a model file; ``expect`` maps spec fields to required values."""
    raw = Path(path).read_bytes()
    if len(raw) < _MODEL_HEADER.size:
        raise FormatError(f"{path}: truncated model header")
    magic, version, hlen = _MODEL_HEADER.unpack_from(raw)
    if magic != MODEL_MAGIC or version != MODEL_VERSION:
        raise FormatError(f"{path}: not a model file (magic {magic!r}, version {version})")
    try:
        header = json.loads(raw[_MODEL_HEADER.size:_MODEL_HEADER.size + hlen].decode())
        kind = header["kind"]
        spec_dict = header["spec"]
        params = header["params"]
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as exc:
        raise FormatError(f"{path}: corrupted model header ({exc})") from exc
    if kind not in SPECS:
        raise FormatError(f"{path}: unknown model kind {kind!r}")
    if expect_kind is not None and kind != expect_kind:
        raise CompatibilityError(f"{path}: expected a {expect_kind} model, file holds {kind}")
    for key, want in (expect or {}).items():
        have = spec_dict.get(key)
        if isinstance(want, tuple):
            have = tuple(have) if have is not None else None
        if have != want:
            raise CompatibilityError(f"{path}: spec field {key}={have!r}, expected {want!r}")
    spec = SPECS[kind](**{k: tuple(v) if isinstance(v, list) else v for k, v in spec_dict.items()})
    module = MODULES[kind](spec)
    offset = _MODEL_HEADER.size + hlen
    state = {}
    for p in params:
        n = int(np.prod(p["shape"])) if p["shape"] else 1
        chunk = raw[offset:offset + 4 * n]
        if len(chunk) != 4 * n:
            raise FormatError(f"{path}: payload truncated at parameter {p['name']}")
        state[p["name"]] = torch.from_numpy(np.frombuffer(chunk, dtype="<f4").copy()).reshape(p["shape"])
        offset += 4 * n
    if offset != len(raw):
        raise FormatError(f"{path}: {len(raw) - offset} trailing bytes after parameters")
    try:
        module.load_state_dict(state)
    except RuntimeError as exc:
        raise CompatibilityError(f"{path}: parameters do not match the {kind} architecture: {exc}") from exc
    return ModelBundle(kind, spec, module, header.get("extra", {}))


# --- numpy-facing forward helpers ---------------------------------------------------------

def to_channels_first(a, dtype=torch.float32):
    """(..., nx, ny, nc) array -> tensor (..., nc, nx, ny)."""
    return torch.as_tensor(np.asarray(a)).to(dtype).movedim(-1, -3)


def to_channels_last(t):
    return t.detach().movedim(-3, -1).cpu().numpy()


def _module(m):
    return m.module if isinstance(m, ModelBundle) else m


def _dtype(module):
    return next(module.parameters()).dtype


def ced_encode(model, x):
    """Latent vector(s) for tessellated field(s) shaped (nx, ny, nc) or (B, nx, ny, nc)."""
    m = _module(model)
    s = m.spec
    x = np.asarray(x)
    single = x.ndim == 3
    if x.shape[-3:] != (s.nx, s.ny, s.nc):
        raise ShapeError(f"CED expects fields of shape {(s.nx, s.ny, s.nc)}, got {x.shape[-3:]}")
    with torch.no_grad():
        t = to_channels_first(x, _dtype(m))
        h = m.encode(t[None] if single else t).numpy()
    return h[0] if single else h


def ced_decode(model, h):
    m = _module(model)
    h = np.asarray(h)
    single = h.ndim == 1
    if h.shape[-1] != m.spec.latent:
        raise ShapeError(f"latent length {h.shape[-1]} != Z={m.spec.latent}")
    with torch.no_grad():
        t = torch.as_tensor(h, dtype=_dtype(m))
        out = to_channels_last(m.decode(t[None] if single else t))
    return out[0] if single else out


def lstm_forward(model, latents):
    m = _module(model)
    z = np.asarray(latents)
    single = z.ndim == 2
    if z.shape[-2:] != (m.spec.s_in, m.spec.latent):
        raise ShapeError(f"LSTM expects input ({m.spec.s_in}, {m.spec.latent}), got {z.shape[-2:]}")
    with torch.no_grad():
        t = torch.as_tensor(z, dtype=_dtype(m))
        out = m(t[None] if single else t).numpy()
    return out[0] if single else out


def convlstm_forward(model, frames):
    m = _module(model)
    s = m.spec
    x = np.asarray(frames)
    single = x.ndim == 4
    if x.shape[-4:] != (s.s_in, s.nx, s.ny, s.nc):
        raise ShapeError(f"ConvLSTM expects ({s.s_in}, {s.nx}, {s.ny}, {s.nc}), got {x.shape[-4:]}")
    with torch.no_grad():
        t = to_channels_first(x, _dtype(m))
        out = to_channels_last(m(t[None] if single else t))
    return out[0] if single else out
