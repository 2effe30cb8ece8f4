"""Desk-scale studies built from the pipeline stages.

* reconstruction quality of the CED on held-out simulations,
* multi-step comparison of CED-LSTM, ConvLSTM and the Kriging baselines,
* rolling-forecast comparison of basic and energy-constrained training.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import torch

from dsovt import pipeline as P
from dsovt.forecast import (ced_lstm_predictor, convlstm_predictor, evaluate_suite,
                            kriging2d_predictor, kriging3d_predictor, rolling_forecast_ced,
                            rolling_forecast_convlstm)
from dsovt.metrics import evaluate_frames, value_range
from dsovt.training import encode_sequences

log = logging.getLogger(__name__)

AMBIGUOUS_DELTA = 0.005


def reconstruction_report(ced, sims, mask=None, batch=64):
    """Encode-decode every tessellated frame and score it against the truth."""
    m = ced.module
    preds = []
    with torch.no_grad():
        for s in sims:
            x = torch.from_numpy(np.ascontiguousarray(s.tess_norm)).movedim(-1, 1)
            out = torch.cat([m.decode(m.encode(x[b:b + batch])) for b in range(0, len(x), batch)])
            preds.append(out.movedim(1, -1).numpy())
    pred = np.concatenate(preds)
    truth = np.concatenate([s.truth_norm for s in sims])
    return evaluate_frames(pred, truth, value_range(truth, mask), mask)


def multistep_suite(manifest, data, ced, lstm, convlstm, out_dir=None, rolling=None, kriging3d=True):
    ev = manifest.evaluate
    t = manifest.training_spec
    s_in, s_out = int(t["s_in"]), int(t["s_out"])
    preds = [ced_lstm_predictor(ced, lstm), convlstm_predictor(convlstm),
             kriging2d_predictor(data.stats, s_in, s_out, int(ev.get("nlags", 20)))]
    if kriging3d:
        preds.append(kriging3d_predictor(data.stats, s_in, s_out, int(ev.get("nlags_3d", 5))))
    mask = None if data.mask.all() else data.mask
    return evaluate_suite(data.test, preds, s_in, s_out, int(ev.get("window_stride", 25)), mask,
                          out_dir, rolling)


def rolling_runs_ced(ced, lstm, sims, start, iterations, mask=None):
    s_in = lstm.spec.s_in
    lat = encode_sequences(ced, [s.tess_norm[start:start + s_in] for s in sims])
    return [rolling_forecast_ced(ced, lstm, z, iterations, truth=s.truth_norm, start=start, mask=mask)
            for z, s in zip(lat, sims)]


def rolling_runs_convlstm(model, sims, start, iterations, mask=None):
    s_in = model.spec.s_in
    return [rolling_forecast_convlstm(model, s.tess_norm[start:start + s_in], iterations,
                                      truth=s.truth_norm, start=start, mask=mask) for s in sims]


def mean_rolling_rrmse(runs):
    return float(np.mean([r.mean("rrmse") for r in runs]))


@dataclass
class PhysicsComparison:
    family: str
    seeds: list = field(default_factory=list)
    basic: list = field(default_factory=list)     # mean rolling R-RMSE per seed
    physics: list = field(default_factory=list)
    basic_ssim: list = field(default_factory=list)
    physics_ssim: list = field(default_factory=list)

    @property
    def basic_mean(self):
        return float(np.mean(self.basic))

    @property
    def physics_mean(self):
        return float(np.mean(self.physics))

    @property
    def passed(self):
        return self.physics_mean <= self.basic_mean


def physics_effect(manifest, data, ced, family, seeds, cache=None, progress=None):
    """Mean rolling-forecast R-RMSE of basic vs energy-constrained training.

    The first seed decides unless its difference is below
    ``AMBIGUOUS_DELTA``, in which case all ``seeds`` are averaged.
    """
    ev = manifest.evaluate
    start, iters = int(ev.get("rolling_start", 75)), int(ev.get("rolling_iterations", 20))
    mask = None if data.mask.all() else data.mask
    out = PhysicsComparison(family)
    for n, seed in enumerate(seeds):
        if family == "ced_lstm":
            basic, _ = P.fit_ced_lstm(manifest, data, ced, seed=seed, physics=False, cache=cache)
            phys, _ = P.fit_ced_lstm(manifest, data, ced, seed=seed, physics=True, cache=cache)
            rb = rolling_runs_ced(ced, basic, data.test, start, iters, mask)
            rp = rolling_runs_ced(ced, phys, data.test, start, iters, mask)
        else:
            (basic, _), (phys, _) = P.fit_convlstm_pair(manifest, data, seed=seed, cache=cache)
            rb = rolling_runs_convlstm(basic, data.test, start, iters, mask)
            rp = rolling_runs_convlstm(phys, data.test, start, iters, mask)
        out.seeds.append(seed)
        out.basic.append(mean_rolling_rrmse(rb))
        out.physics.append(mean_rolling_rrmse(rp))
        out.basic_ssim.append(float(np.mean([r.mean("ssim") for r in rb])))
        out.physics_ssim.append(float(np.mean([r.mean("ssim") for r in rp])))
        if progress:
            progress(family, seed, out.basic[-1], out.physics[-1])
        if n == 0 and abs(out.physics[0] - out.basic[0]) >= AMBIGUOUS_DELTA:
            break
    return out
