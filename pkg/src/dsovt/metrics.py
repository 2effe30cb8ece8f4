"""Field comparison metrics: SSIM, PSNR, R-RMSE and MSE.

Fields are (nx, ny) or (nx, ny, nc) arrays. An optional boolean ``mask``
of shape (nx, ny) marks valid cells; masked-out cells never influence any
metric.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import correlate1d

from dsovt.data import Field
from dsovt.errors import ShapeError, ValidationError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
K1, K2 = 0.01, 0.03


def _arr(x):
    v = x.values if isinstance(x, Field) else np.asarray(x)
    v = v.astype(np.float64, copy=False)
    return v[..., None] if v.ndim == 2 else v


def _pair(a, b, mask):
    a, b = _arr(a), _arr(b)
    if a.shape != b.shape:
        raise ShapeError(f"metric inputs differ in shape: {a.shape} vs {b.shape}")
    if mask is None:
        m = np.ones(a.shape[:2], dtype=bool)
    else:
        m = np.asarray(mask, dtype=bool)
        if m.shape != a.shape[:2]:
            raise ShapeError(f"mask shape {m.shape} does not match grid {a.shape[:2]}")
        if not m.any():
            raise ValidationError("mask excludes every cell")
    return a, b, m


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    """Normalized 1-D Gaussian taps; the 2-D window is their outer product."""
    x = np.arange(size, dtype=np.float64) - (size - 1) / 2
    g = np.exp(-x * x / (2 * sigma * sigma))
    return g / g.sum()


def _blur(x, taps):
    y = correlate1d(x, taps, axis=0, mode="constant", cval=0.0)
    return correlate1d(y, taps, axis=1, mode="constant", cval=0.0)


def ssim_map(a, b, data_range, mask=None):
    """Per-cell SSIM for each channel, shape (nx, ny, nc).

    Local statistics use the Gaussian window restricted to valid in-grid
    cells and renormalized, so borders and masked cells carry no weight.
    """
    if not data_range > 0:
        raise ValidationError(f"data_range must be > 0, got {data_range}")
    a, b, m = _pair(a, b, mask)
    taps = gaussian_window()
    w = m.astype(np.float64)
    norm = _blur(w, taps)
    c1 = (K1 * data_range) ** 2
    c2 = (K2 * data_range) ** 2
    out = np.empty(a.shape)
    for c in range(a.shape[2]):
        x, y = a[..., c] * w, b[..., c] * w
        mx = _blur(x, taps) / norm
        my = _blur(y, taps) / norm
        sxx = _blur(x * a[..., c], taps) / norm - mx * mx
        syy = _blur(y * b[..., c], taps) / norm - my * my
        sxy = _blur(x * b[..., c], taps) / norm - mx * my
        num = (2 * mx * my + c1) * (2 * sxy + c2)
        den = (mx * mx + my * my + c1) * (sxx + syy + c2)
        out[..., c] = num / den
    return out


def ssim(a, b, data_range, mask=None):
    """Mean SSIM over valid cells, averaged over channels."""
    a_, _, m = _pair(a, b, mask)
    smap = ssim_map(a, b, data_range, mask)
    return float(np.mean([smap[..., c][m].mean() for c in range(a_.shape[2])]))


def mse(a, b, mask=None):
    a, b, m = _pair(a, b, mask)
    return float(((a - b) ** 2)[m].mean())


def psnr(a, b, data_range, mask=None):
    """10 log10(range^2 / mse) in dB; +inf for identical inputs."""
    err = mse(a, b, mask)
    if err == 0:
        return float("inf")
    return float(10.0 * np.log10(data_range ** 2 / err))


def rrmse(a, b, data_range, mask=None):
    """Root-mean-square error divided by the ground-truth value range."""
    if not data_range > 0:
        raise ValidationError(f"data_range must be > 0, got {data_range}")
    return float(np.sqrt(mse(a, b, mask)) / data_range)


def value_range(truth, mask=None):
    """max - min of ``truth`` over valid cells of every frame and channel."""
    t = np.asarray(truth, dtype=np.float64)
    if mask is not None:
        t = t[..., np.asarray(mask, bool), :] if t.ndim >= 3 else t[np.asarray(mask, bool)]
    return float(t.max() - t.min())


@dataclass
class MetricReport:
    ssim: float
    psnr: float
    rrmse: float
    mse: float
    per_frame: list = field(default_factory=list)


def evaluate_frames(pred, truth, data_range=None, mask=None):
    """Per-frame metrics of a (S, nx, ny, nc) prediction and their means.

    ``data_range`` defaults to the range of ``truth``; PSNR averages
    per-frame dB values (any identical frame makes it +inf).
    """
    pred = np.asarray(pred, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if pred.shape != truth.shape:
        raise ShapeError(f"prediction {pred.shape} vs truth {truth.shape}")
    if data_range is None:
        data_range = value_range(truth, mask)
    rows = []
    for p, t in zip(pred, truth):
        rows.append({"ssim": ssim(p, t, data_range, mask), "psnr": psnr(p, t, data_range, mask),
                     "rrmse": rrmse(p, t, data_range, mask), "mse": mse(p, t, mask)})
    mean = {k: float(np.mean([r[k] for r in rows])) for k in ("ssim", "psnr", "rrmse", "mse")}
    return MetricReport(per_frame=rows, **mean)
