"""The ten acceptance criteria, each at its stated tolerance.

Every test prints one ``criterion N: PASS|FAIL`` line (collected again in the
terminal summary). Criteria 6-8 train desk-scale models through the stage
cache (``DSOVT_CACHE``, default ``~/.cache/dsovt``); a cold cache costs
several CPU hours, a warm one a few minutes of evaluation.
"""
import math
import time
from pathlib import Path

import numpy as np
import pytest
import torch

from dsovt import kernels
from dsovt import pipeline as P
from dsovt.data import normalize
from dsovt.experiments import multistep_suite, physics_effect, reconstruction_report
from dsovt.kriging import OrdinaryKriging, VariogramModel, grid_cells, krige_dense
from dsovt.manifest import load_manifest
from dsovt.metrics import psnr, rrmse, ssim
from dsovt.models import ConvLSTMSpec, LatentSeqSpec, CED, CEDSpec
from dsovt.sensors import SensorFrame, nearest_owner_reference, tessellate
from dsovt.swe import SWEScenario, init_disturbance, simulate, simulate_mass
from dsovt.training import TrainConfig, encode_sequences, grad_check, train_ced_lstm, train_convlstm

from oracles import ssim_loop

DESK = Path(__file__).resolve().parents[1] / "configs" / "desk.toml"


@pytest.fixture
def verdict(request):
    """Print and record one pass/fail line for a criterion."""
    def record(n, ok, detail):
        line = f"criterion {n}: {'PASS' if ok else 'FAIL'} ({detail})"
        print(line)
        request.config.stash.setdefault("acceptance", []).append(line)
        assert ok, line
    return record


@pytest.fixture(scope="module")
def desk():
    cache = P.StageCache(P.default_cache_dir())
    manifest = P.ensure_dataset(load_manifest(DESK, check_paths=False), P.default_cache_dir())
    data = P.prepare_data(manifest)
    ced, _ = P.fit_ced(manifest, data, cache=cache)
    return manifest, data, ced, cache


def test_criterion_01_voronoi_oracle(verdict):
    rng = np.random.default_rng(2024)
    mismatches = 0
    t_tess = 0.0
    t0 = time.perf_counter()
    for _ in range(1000):
        nx, ny = (int(v) for v in rng.integers(8, 33, size=2))
        k = int(rng.integers(1, 16))
        flat = rng.choice(nx * ny, size=k, replace=False)
        pos = np.stack(np.divmod(flat, ny), axis=1)
        t1 = time.perf_counter()
        owner = tessellate(SensorFrame(pos, rng.normal(size=(k, 1))), nx, ny).owner
        t_tess += time.perf_counter() - t1
        mismatches += int((owner != nearest_owner_reference(pos, nx, ny)).sum())
    total = time.perf_counter() - t0
    verdict(1, mismatches == 0 and total < 10.0,
            f"{mismatches} mismatching cells over 1000 cases; {total:.2f}s total, {t_tess:.2f}s in tessellate, "
            f"backend {kernels.BACKEND}")


def test_criterion_02_swe_invariants(verdict):
    t0 = time.perf_counter()
    h = np.ones((64, 64))
    z = np.zeros_like(h)
    h1, hu, hv, _ = kernels.lf_advance(h, z, z.copy(), 0.1, 1.0, 1000)
    flat = max(np.abs(h1 - 1).max(), np.abs(hu).max(), np.abs(hv).max())
    m0, m1 = simulate_mass(SWEScenario(0.39, 11.0))
    drift = abs(m1 - m0) / m0
    sc = SWEScenario(0.6, 10.0, center=(31.5, 31.5))
    h, hu, hv = init_disturbance(sc).conservative()
    asym = 0.0
    for _ in range(100):
        h, hu, hv, _ = kernels.lf_advance(h, hu, hv, sc.dt, sc.g, 1)
        asym = max(asym, np.abs(np.rot90(h) - h).max(), np.abs(np.rot90(hu) - hv).max(),
                   np.abs(np.rot90(hv) + hu).max())
    total = time.perf_counter() - t0
    ok = flat < 1e-12 and drift < 1e-9 and asym < 1e-10 and total < 60
    verdict(2, ok, f"fixed point {flat:.1e}, mass drift {drift:.1e}, asymmetry {asym:.1e}, {total:.1f}s")


def test_criterion_03_gradients(verdict):
    t0 = time.perf_counter()
    errs = {k: grad_check(k) for k in ("ced_lstm_composite", "convlstm_composite")}
    total = time.perf_counter() - t0
    ok = all(e < 1e-3 for e in errs.values()) and total < 300
    verdict(3, ok, ", ".join(f"{k} {v:.1e}" for k, v in errs.items()) + f", {total:.1f}s")


def test_criterion_04_kriging(verdict):
    rng = np.random.default_rng(7)
    t0 = time.perf_counter()
    wsum = exact = dense = 0.0
    for case in range(200):
        dim = 2 if case % 2 == 0 else 3
        k = int(rng.integers(3, 26))
        if dim == 2:
            flat = rng.choice(24 * 24, size=k, replace=False)
            pts = np.stack(np.divmod(flat, 24), axis=1).astype(float)
            targets = grid_cells(24, 24)
        else:
            flat = rng.choice(16 * 16 * 4, size=k, replace=False)
            pts = np.stack(np.unravel_index(flat, (16, 16, 4)), axis=1).astype(float)
            targets = np.column_stack([grid_cells(16, 16), np.full(256, float(rng.integers(0, 6)))])
        z = rng.normal(size=k)
        model = VariogramModel(float(rng.uniform(0.5, 2)), float(rng.uniform(3, 20)), float(rng.uniform(0, 0.3)))
        ok_ = OrdinaryKriging(pts, z, model)
        w, _ = ok_.weights(targets)
        wsum = max(wsum, np.abs(w.sum(axis=0) - 1).max())
        at_data, _ = ok_.predict(pts)
        exact = max(exact, np.abs(at_data - z).max())
        est, _ = ok_.predict(targets[:64])
        ref, wref = krige_dense(pts, z, model, targets[:64])
        dense = max(dense, np.abs(est - ref).max(), np.abs(w[:, :64].T - wref).max())
    total = time.perf_counter() - t0
    ok = wsum < 1e-10 and exact < 1e-6 and dense < 1e-10 and total < 30
    verdict(4, ok, f"weight sum {wsum:.1e}, exactness {exact:.1e}, dense oracle {dense:.1e}, {total:.1f}s")


def test_criterion_05_metrics(verdict):
    rng = np.random.default_rng(5)
    x = rng.uniform(size=(32, 32, 3))
    ident = ssim(x, x, 1.0) == 1.0 and rrmse(x, x, 1.0) == 0.0 and psnr(x, x, 1.0) == math.inf
    worst = 0.0
    for n in range(50):
        a = rng.uniform(size=(16, 16, int(rng.integers(1, 4))))
        b = np.clip(a + rng.normal(scale=rng.uniform(0.01, 0.5), size=a.shape), 0, 1)
        mask = rng.uniform(size=(16, 16)) > 0.2 if n % 5 == 0 else None
        worst = max(worst, abs(ssim(a, b, 1.0, mask) - ssim_loop(a, b, 1.0, mask)))
    verdict(5, ident and worst < 1e-8, f"identities {'exact' if ident else 'broken'}, SSIM oracle gap {worst:.1e}")


@pytest.mark.slow
def test_criterion_06_ced_reconstruction(verdict, desk):
    manifest, data, ced, _ = desk
    rep = reconstruction_report(ced, data.test)
    ok = rep.ssim >= 0.90 and rep.rrmse <= 0.10
    verdict(6, ok, f"held-out SSIM {rep.ssim:.4f}, PSNR {rep.psnr:.2f} dB, R-RMSE {rep.rrmse:.4f} "
                   f"on {len(data.test)} sims, Z={ced.spec.latent}")


@pytest.mark.slow
def test_criterion_07_baseline_ordering(verdict, desk, tmp_path):
    manifest, data, ced, cache = desk
    lstm, _ = P.fit_ced_lstm(manifest, data, ced, physics=False, cache=cache)
    (conv, _), _ = P.fit_convlstm_pair(manifest, data, cache=cache)
    res = multistep_suite(manifest, data, ced, lstm, conv, out_dir=tmp_path)
    row = {r["method"]: r for r in res.rows}
    s = {k: v["ssim"] for k, v in row.items()}
    ok = s["ced_lstm"] > s["kriging2d"] and s["convlstm"] > s["kriging2d"] and row["ced_lstm"]["rrmse"] <= 0.15
    detail = ", ".join(f"{k} SSIM {v['ssim']:.3f} R-RMSE {v['rrmse']:.3f}" for k, v in row.items())
    verdict(7, ok, detail)


@pytest.mark.slow
@pytest.mark.parametrize("family", ["ced_lstm", "convlstm"])
def test_criterion_08_physics_effect(verdict, desk, family):
    manifest, data, ced, cache = desk
    seeds = [int(s) for s in manifest.evaluate.get("seeds", [0, 1, 2])]
    cmp = physics_effect(manifest, data, ced, family, seeds, cache=cache)
    detail = (f"{family}: seeds {cmp.seeds}, R-RMSE basic {cmp.basic_mean:.4f} vs physics {cmp.physics_mean:.4f}, "
              f"SSIM basic {np.mean(cmp.basic_ssim):.4f} vs physics {np.mean(cmp.physics_ssim):.4f}, "
              f"{len(data.test)} test sims, {manifest.evaluate['rolling_iterations']} iterations "
              f"from step {manifest.evaluate['rolling_start']}")
    verdict(8, cmp.passed, detail)


@pytest.fixture(scope="module")
def smoke_sims():
    solver = dict(nx=32, ny=32, total_steps=700, equilibrium_steps=500, snapshot_interval=10)
    phys = [simulate(SWEScenario(dh, r, center=(15.5, 15.5), **solver)).values.astype(np.float64)
            for dh, r in ((0.4, 6.0), (0.7, 9.0))]
    norm, stats = normalize(np.concatenate(phys))
    norm = [normalize(p, stats)[0].astype(np.float32) for p in phys]
    return phys, norm, stats


def test_criterion_09_lambda_zero_equivalence(verdict, smoke_sims):
    phys, norm, stats = smoke_sims
    ced = CED(CEDSpec(32, 32, 3, latent=16), seed=0)
    lat = encode_sequences(ced, norm)
    lspec = LatentSeqSpec(16, 3, 3, hidden=32)
    runs = {}
    for physics in (False, True):
        cfg = TrainConfig(epochs=10, batch_size=8, seed=4, s_in=3, s_out=3, physics=physics, lambda_energy=0.0)
        runs[("lstm", physics)] = train_ced_lstm(lat, ced, lspec, cfg, stats, phys, trajectory=True)[1]
        cfg = TrainConfig(epochs=10, batch_size=8, seed=4, s_in=3, s_out=3, window_stride=2,
                          physics=physics, lambda_energy=0.0, n_init=0)
        cspec = ConvLSTMSpec(32, 32, 3, 3, 3, layers=1, filters=4)
        runs[("conv", physics)] = train_convlstm(norm, norm, cspec, cfg, stats, phys, trajectory=True)[1]

    def same(fam):
        a, b = runs[(fam, False)].trajectory, runs[(fam, True)].trajectory
        return len(a) == len(b) == 10 and all(torch.equal(p, q) for p, q in zip(a, b))
    active = all(e > 0 for e in runs[("lstm", True)].column("energy_term") + runs[("conv", True)].column("energy_term"))
    ok = same("lstm") and same("conv") and active
    verdict(9, ok, f"CED-LSTM trajectory {'bitwise equal' if same('lstm') else 'differs'}, "
                   f"ConvLSTM trajectory {'bitwise equal' if same('conv') else 'differs'} over 10 epochs, "
                   f"energy term evaluated: {active}")


def test_criterion_10_warmup(verdict, smoke_sims):
    phys, norm, stats = smoke_sims
    cfg = TrainConfig(epochs=53, batch_size=32, seed=1, s_in=3, s_out=3, window_stride=5,
                      physics=True, lambda_energy=5e-10, n_init=50)
    spec = ConvLSTMSpec(32, 32, 3, 3, 3, layers=1, filters=2)
    _, rep = train_convlstm(norm, norm, spec, cfg, stats, phys)
    e = rep.column("energy_term")
    ok = all(v == 0.0 for v in e[:50]) and all(v > 0 for v in e[50:]) and rep.switch_epoch == 51
    verdict(10, ok, f"energy term zero for epochs 1-50: {all(v == 0.0 for v in e[:50])}, "
                    f"epochs 51-53: {[f'{v:.3g}' for v in e[50:]]}")
