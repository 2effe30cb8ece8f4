import numpy as np
import pytest
from hypothesis import given, strategies as st

from dsovt.errors import BoundsError, CapacityError, ContractError, FormatError
from dsovt.sensors import (SensorFrame, lattice, nearest_owner_reference, observe, read_sensors,
                           sample_sensors_jittered, sample_sensors_random, tessellate, tessellate_series,
                           write_sensors)


def test_observe_examples(rng):
    f = np.full((8, 8, 3), 2.5)
    assert np.all(observe(f, [(1, 2), (7, 7)]) == 2.5)
    f = rng.normal(size=(8, 8, 3))
    f[0, 0] = (0.1, -0.2, 1.3)
    assert np.array_equal(observe(f, [(0, 0)])[0], [0.1, -0.2, 1.3])
    cells = [(i, j) for i in range(8) for j in range(8)]
    assert np.array_equal(observe(f, cells), f.reshape(64, 3))


def test_observe_out_of_range_names_index():
    with pytest.raises(BoundsError, match="sensor 1"):
        observe(np.zeros((8, 8, 1)), [(0, 0), (8, 0)])


def test_random_sensors_capacity_and_determinism():
    seq = np.zeros((3, 8, 8, 1))
    with pytest.raises(CapacityError):
        sample_sensors_random(seq, 64, seed=0)
    a = sample_sensors_random(seq, 10, seed=5)
    b = sample_sensors_random(seq, 10, seed=5)
    assert all(np.array_equal(x.positions, y.positions) for x, y in zip(a, b))
    a.validate(8, 8)


def test_random_sensors_respect_mask():
    mask = np.zeros((8, 8), bool)
    mask[:, :4] = True
    s = sample_sensors_random(np.zeros((5, 8, 8, 1)), 20, seed=1, mask=mask)
    assert all((f.positions[:, 1] < 4).all() for f in s)
    with pytest.raises(CapacityError):
        sample_sensors_random(np.zeros((1, 8, 8, 1)), 32, seed=1, mask=mask)


def test_noaa_coverage():
    s = sample_sensors_random(np.zeros((1, 360, 180, 1), np.float32), 200, seed=0)
    assert s.coverage(360, 180) == pytest.approx(200 / 64800)
    assert round(100 * s.coverage(360, 180), 2) == 0.31


def test_jitter_zero_is_lattice():
    s = sample_sensors_jittered(np.zeros((4, 64, 64, 3)), 100, jitter=0, seed=0)
    base = lattice(100, 64, 64)
    assert len(np.unique(base[:, 0])) == 10 and len(np.unique(base[:, 1])) == 10
    assert all(np.array_equal(f.positions, base) for f in s)


def test_jitter_bounds_and_distinctness():
    s = sample_sensors_jittered(np.zeros((300, 64, 64, 1), np.float32), 100, jitter=2, seed=3)
    base = lattice(100, 64, 64)
    for f in s:
        assert np.abs(f.positions - base).max() <= 2
        assert len({tuple(p) for p in f.positions}) == 100
    assert not all(np.array_equal(s[0].positions, f.positions) for f in s[1:])


def test_single_sensor_is_constant():
    v = tessellate(SensorFrame([(3, 4)], [[1.0, 2.0]]), 8, 8)
    assert np.all(v.values == [1.0, 2.0]) and np.all(v.owner == 0)


def test_identity_tessellation(rng):
    f = rng.normal(size=(8, 10, 2))
    pos = np.array([(i, j) for i in range(8) for j in range(10)])
    out = tessellate(SensorFrame(pos, observe(f, pos)), 8, 10)
    assert np.array_equal(out.values, f)


def test_empty_sensor_list():
    with pytest.raises(ContractError):
        tessellate(SensorFrame(np.zeros((0, 2)), np.zeros((0, 1))), 8, 8)


def test_ties_go_to_lowest_index():
    # cell (2, 0) is equidistant from both sensors
    out = tessellate(SensorFrame([(4, 0), (0, 0)], [[1.0], [2.0]]), 8, 8)
    assert out.owner[2, 0] == 0
    out = tessellate(SensorFrame([(0, 0), (4, 0)], [[1.0], [2.0]]), 8, 8)
    assert out.owner[2, 0] == 0


@given(st.integers(8, 20), st.integers(8, 20), st.integers(1, 12), st.integers(0, 2**31 - 1))
def test_owner_matches_reference(nx, ny, k, seed):
    r = np.random.default_rng(seed)
    flat = r.choice(nx * ny, size=k, replace=False)
    pos = np.stack(np.divmod(flat, ny), axis=1)
    vals = r.normal(size=(k, 3))
    out = tessellate(SensorFrame(pos, vals), nx, ny)
    ref = nearest_owner_reference(pos, nx, ny)
    assert np.array_equal(out.owner, ref)
    assert np.array_equal(out.values, vals[ref])
    # idempotence: observing the tessellated field at the sensors gives the sensor values back
    again = tessellate(SensorFrame(pos, observe(out.values, pos)), nx, ny)
    assert np.array_equal(again.values, out.values)


def test_series_and_text_round_trip(tmp_path, sw_sequence):
    s = sample_sensors_jittered(sw_sequence, 16, jitter=1, seed=2)
    p = tmp_path / "s.txt"
    write_sensors(p, s)
    back = read_sensors(p)
    assert len(back) == len(s)
    for a, b in zip(s, back):
        assert np.array_equal(a.positions, b.positions) and np.array_equal(a.values, b.values)
    stack = tessellate_series(s, 16, 16)
    assert stack.shape == sw_sequence.shape


def test_text_block_count_mismatch(tmp_path):
    p = tmp_path / "bad.txt"
    p.write_text("# t=0 k=2\n0 0 1.0\n")
    with pytest.raises(FormatError):
        read_sensors(p)
