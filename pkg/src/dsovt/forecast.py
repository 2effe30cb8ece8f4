"""Rolling forecasts, multi-step predictors and the comparison harness.

Predictors map (simulation, start index) to the S_out frames following the
input window that begins at ``start``; all fields here are normalized.
"""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from dsovt.errors import ContractError, ShapeError, ValidationError
from dsovt.kriging import kriging_forecast_2d, kriging_forecast_3d
from dsovt.metrics import MetricReport, evaluate_frames, value_range
from dsovt.models import ModelBundle

log = logging.getLogger(__name__)


def _module(m):
    return m.module if isinstance(m, ModelBundle) else m


@dataclass
class RollingRun:
    start: int
    iterations: int
    windows: list                                 # predicted (S_out, nx, ny, nc) per iteration
    inputs: list = field(default_factory=list)    # what each iteration consumed
    reports: list = field(default_factory=list)   # MetricReport per iteration, when truth is given
    latents: list = field(default_factory=list)   # CED-LSTM only: predicted latent windows

    def mean(self, key):
        return float(np.mean([getattr(r, key) for r in self.reports]))


def _check_iterations(n):
    if n < 1:
        raise ValidationError(f"rolling forecast needs >= 1 iteration, got {n}")


def _truth_windows(truth, start, s_in, s_out, n):
    """Ground-truth frames for each iteration: iteration k covers
    start + s_in + k*s_out ... + s_out - 1."""
    if truth is None:
        return None
    first = start + s_in
    last = first + n * s_out
    if last > len(truth):
        raise ContractError(f"rolling forecast needs frames up to {last - 1}, sequence has {len(truth)}")
    return [truth[first + k * s_out:first + (k + 1) * s_out] for k in range(n)]


def _score(run, truth_windows, data_range, mask):
    if truth_windows is None:
        return run
    if data_range is None:
        data_range = value_range(np.concatenate(truth_windows), mask)
    run.reports = [evaluate_frames(w, t, data_range, mask) for w, t in zip(run.windows, truth_windows)]
    return run


def rolling_forecast_ced(ced, lstm, initial_latents, iterations, truth=None, start=0,
                         data_range=None, mask=None):
    """Autoregressive latent forecast: each predicted window is the next input.

    ``initial_latents`` is (S_in, Z). With ``truth`` (the full normalized
    sequence the window was taken from, input window at ``start``) every
    iteration is scored against the frames it predicts.
    """
    _check_iterations(iterations)
    c, m = _module(ced), _module(lstm)
    s_in, s_out = m.spec.s_in, m.spec.s_out
    if s_in != s_out:
        raise ContractError("rolling forecasts feed each output window back, so s_in must equal s_out")
    z = torch.as_tensor(np.asarray(initial_latents), dtype=torch.float32)
    if tuple(z.shape) != (s_in, m.spec.latent):
        raise ShapeError(f"initial latents must be ({s_in}, {m.spec.latent}), got {tuple(z.shape)}")
    run = RollingRun(start, iterations, [])
    with torch.no_grad():
        for _ in range(iterations):
            run.inputs.append(z.numpy().copy())
            out = m(z[None])[0]
            run.latents.append(out.numpy().copy())
            run.windows.append(c.decode(out).movedim(1, -1).numpy())
            z = out
    return _score(run, _truth_windows(truth, start, s_in, s_out, iterations), data_range, mask)


def rolling_forecast_convlstm(model, initial_frames, iterations, truth=None, start=0,
                              data_range=None, mask=None):
    """Autoregressive ConvLSTM forecast; predicted dense frames are fed back
    as the next input window (not re-tessellated observations)."""
    _check_iterations(iterations)
    m = _module(model)
    s = m.spec
    if s.s_in != s.s_out:
        raise ContractError("rolling forecasts feed each output window back, so s_in must equal s_out")
    x = np.asarray(initial_frames, dtype=np.float32)
    if x.shape != (s.s_in, s.nx, s.ny, s.nc):
        raise ShapeError(f"initial frames must be {(s.s_in, s.nx, s.ny, s.nc)}, got {x.shape}")
    run = RollingRun(start, iterations, [])
    with torch.no_grad():
        for _ in range(iterations):
            run.inputs.append(x.copy())
            out = m(torch.from_numpy(x).movedim(-1, 1)[None])[0].movedim(1, -1).numpy()
            run.windows.append(out)
            x = out
    return _score(run, _truth_windows(truth, start, s.s_in, s.s_out, iterations), data_range, mask)


# --- multi-step predictors -------------------------------------------------------------

@dataclass
class Predictor:
    """Named callable ``fn(sim, start) -> (s_out, nx, ny, nc)`` prediction."""

    name: str
    fn: object

    def __call__(self, sim, start):
        return self.fn(sim, start)


def ced_lstm_predictor(ced, lstm, name="ced_lstm"):
    c, m = _module(ced), _module(lstm)
    s_in = m.spec.s_in

    def fn(sim, start):
        with torch.no_grad():
            x = torch.from_numpy(np.ascontiguousarray(sim.tess_norm[start:start + s_in])).movedim(-1, 1)
            return c.decode(m(c.encode(x)[None])[0]).movedim(1, -1).numpy()
    return Predictor(name, fn)


def convlstm_predictor(model, name="convlstm"):
    m = _module(model)
    s_in = m.spec.s_in

    def fn(sim, start):
        with torch.no_grad():
            x = torch.from_numpy(np.ascontiguousarray(sim.tess_norm[start:start + s_in])).movedim(-1, 1)
            return m(x[None])[0].movedim(1, -1).numpy()
    return Predictor(name, fn)


def kriging2d_predictor(stats, s_in, s_out, nlags=20, name="kriging2d"):
    def fn(sim, start):
        frames = [sim.sensor_frame(t, stats) for t in range(start, start + s_in)]
        nx, ny = sim.truth.shape[1:3]
        return kriging_forecast_2d(frames, nx, ny, s_out, nlags)
    return Predictor(name, fn)


def kriging3d_predictor(stats, s_in, s_out, nlags=5, name="kriging3d"):
    def fn(sim, start):
        frames = [sim.sensor_frame(t, stats) for t in range(start, start + s_in)]
        nx, ny = sim.truth.shape[1:3]
        return kriging_forecast_3d(frames, nx, ny, s_out, nlags)
    return Predictor(name, fn)


def oracle_predictor(s_in, s_out, name="identity"):
    """Returns the true future frames; a sanity row for the harness."""
    return Predictor(name, lambda sim, start: sim.truth_norm[start + s_in:start + s_in + s_out])


# --- harness -------------------------------------------------------------------------------

@dataclass
class SuiteResult:
    rows: list                       # one dict per method for metrics.csv
    window_mse: dict                 # method -> per-window MSE list
    rolling: dict = field(default_factory=dict)   # variant -> list of per-iteration mean dicts


def eval_starts(t, s_in, s_out, stride):
    return list(range(0, t - s_in - s_out + 1, stride))


def evaluate_suite(sims, predictors, s_in, s_out, stride=25, mask=None, out_dir=None,
                   rolling=None, hist_bins=20):
    """Score every predictor on input windows of every test simulation.

    Metrics average over all predicted frames; the data range is the
    ground-truth range over every evaluated frame. ``rolling`` maps a variant
    name to a list of scored RollingRuns whose per-iteration means go to
    rolling.csv. With ``out_dir`` the CSV files are written there.
    """
    if not sims:
        raise ContractError("evaluate_suite needs at least one test simulation")
    starts = {k: eval_starts(len(s.truth_norm), s_in, s_out, stride) for k, s in enumerate(sims)}
    truth_all = np.concatenate([sims[k].truth_norm[i + s_in:i + s_in + s_out]
                                for k in starts for i in starts[k]])
    data_range = value_range(truth_all, mask)
    rows, window_mse = [], {}
    for pred in predictors:
        frames, errs = [], []
        elapsed = 0.0
        for k, sim in enumerate(sims):
            for i in starts[k]:
                t0 = time.perf_counter()
                out = np.asarray(pred(sim, i))
                elapsed += time.perf_counter() - t0
                truth = sim.truth_norm[i + s_in:i + s_in + s_out]
                rep = evaluate_frames(out, truth, data_range, mask)
                frames.extend(rep.per_frame)
                errs.append(rep.mse)
        rows.append({
            "method": pred.name,
            "ssim": float(np.mean([f["ssim"] for f in frames])),
            "psnr_db": float(np.mean([f["psnr"] for f in frames])),
            "rrmse": float(np.mean([f["rrmse"] for f in frames])),
            "infer_s": elapsed,
        })
        window_mse[pred.name] = errs
        log.info("%s: ssim %.4f rrmse %.4f (%.1fs)", pred.name, rows[-1]["ssim"], rows[-1]["rrmse"], elapsed)
    result = SuiteResult(rows, window_mse, rolling_table(rolling or {}))
    if out_dir is not None:
        write_suite(result, out_dir, hist_bins)
    return result


def rolling_table(rolling):
    """Per-iteration metric means across the runs of each variant."""
    table = {}
    for variant, runs in rolling.items():
        n = min(r.iterations for r in runs)
        table[variant] = [{
            "iteration": k + 1,
            "ssim": float(np.mean([r.reports[k].ssim for r in runs])),
            "psnr_db": float(np.mean([r.reports[k].psnr for r in runs])),
            "rrmse": float(np.mean([r.reports[k].rrmse for r in runs])),
        } for k in range(n)]
    return table


def _fmt(v):
    if isinstance(v, float):
        return "inf" if math.isinf(v) and v > 0 else repr(v)
    return v


def _write(path, fields, rows):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=fields)
        w.writeheader()
        for r in rows:
            w.writerow({k: _fmt(r[k]) for k in fields})


def histogram_rows(window_mse, bins=20):
    """Shared-edge histograms of per-window MSE, one block per method."""
    values = np.concatenate([np.asarray(v, dtype=np.float64) for v in window_mse.values()])
    edges = np.histogram_bin_edges(values, bins=bins)
    rows = []
    for name, errs in window_mse.items():
        counts, _ = np.histogram(errs, bins=edges)
        rows += [{"bin_lo": float(lo), "bin_hi": float(hi), "count": int(c), "variant": name}
                 for lo, hi, c in zip(edges[:-1], edges[1:], counts)]
    return rows


def write_rolling(path, table):
    """rolling.csv from a ``rolling_table`` result."""
    rows = [dict(r, variant=v) for v, rows in table.items() for r in rows]
    _write(path, ["iteration", "ssim", "psnr_db", "rrmse", "variant"], rows)


def write_suite(result, out_dir, hist_bins=20):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    _write(out / "metrics.csv", ["method", "ssim", "psnr_db", "rrmse", "infer_s"], result.rows)
    write_rolling(out / "rolling.csv", result.rolling)
    _write(out / "hist.csv", ["bin_lo", "bin_hi", "count", "variant"],
           histogram_rows(result.window_mse, hist_bins))
    return out


__all__ = [
    "RollingRun", "rolling_forecast_ced", "rolling_forecast_convlstm", "Predictor",
    "ced_lstm_predictor", "convlstm_predictor", "kriging2d_predictor", "kriging3d_predictor",
    "oracle_predictor", "evaluate_suite", "SuiteResult", "MetricReport", "write_suite",
    "write_rolling", "rolling_table",
]
