import numpy as np
import pytest
from hypothesis import given, strategies as st

from dsovt import kernels
from dsovt.data import read_tensor
from dsovt.errors import ParameterRangeError, PlacementError, PositivityError
from dsovt.swe import SWEScenario, SWEState, generate_dataset, init_disturbance, simulate, simulate_mass, step

SMALL = dict(total_steps=540, equilibrium_steps=500, snapshot_interval=10)


def test_disturbance_matches_brute_force_disk():
    sc = SWEScenario(0.5, 4.0, center=(32.0, 32.0))
    h = init_disturbance(sc).h
    count = sum((i - 32) ** 2 + (j - 32) ** 2 <= 16 for i in range(64) for j in range(64))
    assert int((h > 1.0).sum()) == count
    assert np.all(h[h > 1.0] == 1.5)


def test_zero_disturbance_is_flat():
    st_ = init_disturbance(SWEScenario(0.0, 6.0))
    assert np.all(st_.h == 1.0) and not st_.u.any() and not st_.v.any()


@pytest.mark.parametrize("kw,err", [
    (dict(delta_h=0.9, radius=6.0), ParameterRangeError),
    (dict(delta_h=0.5, radius=13.0), ParameterRangeError),
    (dict(delta_h=0.5, radius=8.0, center=(5.0, 30.0)), PlacementError),
    (dict(delta_h=0.5, radius=8.0, dt=0.5), ParameterRangeError),
])
def test_scenario_guards(kw, err):
    with pytest.raises(err):
        SWEScenario(**kw)


def test_flat_state_fixed_point():
    h = np.ones((32, 32))
    z = np.zeros_like(h)
    h2, hu, hv, bad = kernels.lf_advance(h, z, z.copy(), 0.1, 1.0, 1000)
    assert bad < 0
    assert max(np.abs(h2 - 1).max(), np.abs(hu).max(), np.abs(hv).max()) < 1e-12


@given(st.floats(0.2, 0.8), st.floats(4.0, 12.0), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_mass_per_step(dh, r, fx, fy):
    cx = r + fx * (63 - 2 * r)
    cy = r + fy * (63 - 2 * r)
    sc = SWEScenario(dh, r, center=(cx, cy))
    state = init_disturbance(sc)
    for k in range(3):
        nxt = step(state, sc, k)
        m0, m1 = state.h.sum(), nxt.h.sum()
        assert abs(m1 - m0) / m0 < 1e-12
        state = nxt


def test_rotation_symmetry_100_steps():
    sc = SWEScenario(0.6, 10.0, center=(31.5, 31.5))
    s = init_disturbance(sc)
    h, hu, hv = s.conservative()
    worst = 0.0
    for _ in range(100):
        h, hu, hv, _ = kernels.lf_advance(h, hu, hv, sc.dt, sc.g, 1)
        # np.rot90 turns the grid so that x-momentum becomes y-momentum and y becomes -x
        worst = max(worst, np.abs(np.rot90(h) - h).max(),
                    np.abs(np.rot90(hu) - hv).max(), np.abs(np.rot90(hv) + hu).max())
    assert worst < 1e-10


def test_negative_depth_reports_step():
    h = np.ones((8, 8))
    h[3, 3] = 0.1
    hu = np.zeros_like(h)
    hu[3, 3] = 2.0
    with pytest.raises(PositivityError) as exc:
        step(SWEState.from_conservative(h, hu, np.zeros_like(h)), SWEScenario(0.0, 4.0, center=(31.5, 31.5)), 7)
    assert exc.value.step == 7


def test_flat_scenario_frames():
    seq = simulate(SWEScenario(0.0, 6.0))
    assert seq.values.shape == (300, 64, 64, 3)
    assert np.all(seq.values[..., 2] == 1.0) and not seq.values[..., :2].any()


def test_simulate_deterministic_and_finite():
    sc = SWEScenario(0.39, 11.0, **SMALL)
    a, b = simulate(sc), simulate(sc)
    assert np.array_equal(a.values, b.values)
    assert a.values.shape == (4, 64, 64, 3) and np.isfinite(a.values).all()
    assert a.values[..., 2].min() > 0


def test_full_run_mass_drift():
    m0, m1 = simulate_mass(SWEScenario(0.39, 11.0))
    assert abs(m1 - m0) / m0 < 1e-9


def test_generate_dataset(tmp_path):
    solver = dict(SMALL, nx=32, ny=32)
    a = generate_dataset(tmp_path / "a", 3, 2, seed=42, solver=solver)
    b = generate_dataset(tmp_path / "b", 3, 2, seed=42, solver=solver)
    assert a.to_dict() == b.to_dict()
    assert (tmp_path / "a" / "manifest.toml").read_text() == (tmp_path / "b" / "manifest.toml").read_text()
    for name in a.dataset_paths:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    sims = a.simulations
    assert [s["split"] for s in sims] == ["train"] * 3 + ["test"] * 2
    assert len({s["seed"] for s in sims}) == 5
    assert all(0.2 <= s["delta_h"] <= 0.8 and 4 <= s["radius"] <= 12 for s in sims)
    assert read_tensor(tmp_path / "a" / "sim_000.dsvt").values.shape == (4, 32, 32, 3)
