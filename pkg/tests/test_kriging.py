import numpy as np
import pytest
from hypothesis import given, strategies as st

from dsovt.errors import ConditioningError, ContractError
from dsovt.kriging import (OrdinaryKriging, VariogramModel, empirical_semivariogram, fit_variogram,
                           grid_cells, krige2d, krige3d, krige_dense, kriging_forecast_2d,
                           kriging_forecast_3d, linear_extrapolate)
from dsovt.sensors import SensorFrame

MODEL = VariogramModel(sill=1.0, range=8.0, nugget=0.0)


def _points(rng, k, nx=16, ny=16):
    flat = rng.choice(nx * ny, size=k, replace=False)
    return np.stack(np.divmod(flat, ny), axis=1).astype(float)


def test_variogram_shape():
    m = VariogramModel(2.0, 5.0, 0.3)
    assert m(0.0) == 0.3
    d = np.linspace(0, 10, 101)
    assert np.all(np.diff(m(d)) >= 0)
    assert np.all(m(d[d >= 5.0]) == pytest.approx(2.3))


def test_flat_values_degenerate(rng):
    m = fit_variogram(_points(rng, 10), np.full(10, 3.0))
    assert m.degenerate and m.sill == 0.0 and m.nugget > 0
    est, _ = krige2d(_points(rng, 10), np.full(10, 3.0), m, 8, 8)
    assert np.allclose(est, 3.0, atol=1e-12)


def test_fit_on_a_line():
    pts = np.column_stack([np.arange(30.0), np.zeros(30)])
    vals = 0.5 * np.arange(30.0)
    m = fit_variogram(pts, vals, nlags=10)
    assert m.range > 0 and m.sill > 0
    ok = m.lag_counts > 0
    resid = m(m.lag_centers[ok]) - m.lag_gamma[ok]
    assert np.mean(resid ** 2) < np.var(m.lag_gamma[ok])


def test_fit_reports_nlags_bins(rng):
    m = fit_variogram(_points(rng, 100, 64, 64), rng.normal(size=100), nlags=20)
    assert len(m.lag_centers) == len(m.lag_gamma) == len(m.lag_counts) == 20
    assert m.lag_counts.sum() == 100 * 99 // 2


def test_empirical_semivariogram_brute_force(rng):
    pts = _points(rng, 12)
    z = rng.normal(size=12)
    centers, gamma, counts = empirical_semivariogram(pts, z, 5)
    d = [np.hypot(*(pts[a] - pts[b])) for a in range(12) for b in range(a + 1, 12)]
    sv = [0.5 * (z[a] - z[b]) ** 2 for a in range(12) for b in range(a + 1, 12)]
    edges = np.linspace(0, max(d), 6)
    for k in range(5):
        sel = [s for dd, s in zip(d, sv) if edges[k] <= dd < edges[k + 1] or (k == 4 and dd == edges[5])]
        assert counts[k] == len(sel)
        if sel:
            assert gamma[k] == pytest.approx(np.mean(sel), rel=1e-12)


def test_fit_needs_three_points():
    with pytest.raises(Exception):
        fit_variogram(np.zeros((2, 2)), [1.0, 2.0])


def test_exactness_and_unit_weights(rng):
    pts = _points(rng, 15)
    z = rng.normal(size=15)
    est, var = krige2d(pts, z, MODEL, 16, 16)
    assert np.max(np.abs(est[pts[:, 0].astype(int), pts[:, 1].astype(int)] - z)) < 1e-6
    w, _ = OrdinaryKriging(pts, z, MODEL).weights(grid_cells(16, 16))
    assert np.max(np.abs(w.sum(axis=0) - 1)) < 1e-10
    assert var.min() > -1e-9


def test_three_point_dense_oracle():
    pts = np.array([[1.0, 1.0], [5.0, 2.0], [3.0, 6.0]])
    z = np.array([1.0, 2.0, 4.0])
    tgt = np.array([[2.0, 3.0]])
    g = lambda d: MODEL(d)
    d = lambda a, b: np.hypot(*(a - b))
    a = np.ones((4, 4))
    a[3, 3] = 0.0
    for i in range(3):
        for j in range(3):
            a[i, j] = 0.0 if i == j else g(d(pts[i], pts[j]))
    b = np.append([g(d(p, tgt[0])) for p in pts], 1.0)
    w = np.linalg.solve(a, b)
    got, _ = OrdinaryKriging(pts, z, MODEL).weights(tgt)
    assert np.max(np.abs(got[:, 0] - w[:3])) < 1e-10


@given(st.integers(3, 25), st.integers(0, 2**31 - 1), st.floats(0.0, 0.5))
def test_lu_matches_dense_solver(k, seed, nugget):
    r = np.random.default_rng(seed)
    pts = _points(r, k)
    z = r.normal(size=k)
    model = VariogramModel(1.0, float(r.uniform(3, 20)), nugget)
    targets = r.uniform(0, 15, size=(20, 2))
    est, _ = OrdinaryKriging(pts, z, model).predict(targets)
    ref, wref = krige_dense(pts, z, model, targets)
    w, _ = OrdinaryKriging(pts, z, model).weights(targets)
    assert np.max(np.abs(est - ref)) < 1e-10
    assert np.max(np.abs(w.T - wref)) < 1e-10


@given(st.floats(-100, 100))
def test_translation_equivariance(c):
    r = np.random.default_rng(4)
    pts = _points(r, 10)
    z = r.normal(size=10)
    a, _ = krige2d(pts, z, MODEL, 16, 16)
    b, _ = krige2d(pts, z + c, MODEL, 16, 16)
    assert np.max(np.abs(b - (a + c))) < 1e-9 * max(1.0, abs(c))


def test_duplicates(rng):
    pts = np.array([[1.0, 1.0], [1.0, 1.0], [5.0, 5.0], [2.0, 7.0]])
    z = np.array([1.0, 3.0, 0.0, 1.0])
    with pytest.warns(RuntimeWarning):
        ok = OrdinaryKriging(pts, z, MODEL)
    assert len(ok.points) == 3 and 2.0 in ok.values
    with pytest.raises(ConditioningError):
        OrdinaryKriging(pts, z, MODEL, duplicates="error")


def test_linear_extrapolation():
    t = np.arange(4.0)
    stack = 2.0 + 0.5 * t[:, None, None] * np.ones((4, 3, 3))
    out = linear_extrapolate(stack, 3)
    assert np.allclose(out[:, 0, 0], 2.0 + 0.5 * np.arange(4.0, 7.0), atol=1e-12)


def test_forecast_2d_examples(rng):
    pts = _points(rng, 12).astype(int)
    base = rng.normal(size=(12, 2))
    const = [SensorFrame(pts, base) for _ in range(3)]
    out = kriging_forecast_2d(const, 16, 16, 2, nlags=6)
    assert out.shape == (2, 16, 16, 2)
    assert np.max(np.abs(out[0] - out[1])) < 1e-10
    lin = [SensorFrame(pts, base + 0.1 * t) for t in range(4)]
    out = kriging_forecast_2d(lin, 16, 16, 3, nlags=6)
    for k in range(3):
        got = out[k, pts[:, 0], pts[:, 1]]
        assert np.max(np.abs(got - (base + 0.1 * (4 + k)))) < 1e-8
    with pytest.raises(ContractError):
        kriging_forecast_2d(const[:1], 16, 16, 2)


def test_krige3d_examples(rng):
    pts = np.column_stack([_points(rng, 8), rng.integers(0, 3, size=8)]).astype(float)
    z = rng.normal(size=8)
    out = krige3d(pts, z, MODEL, 16, 16, [0, 1, 2])
    for p, v in zip(pts.astype(int), z):
        assert abs(out[p[2], p[0], p[1]] - v) < 1e-6
    flat = krige3d(pts, np.full(8, 2.5), MODEL, 8, 8, [4])
    assert np.allclose(flat, 2.5, atol=1e-10)
    five = pts[:5]
    tg = np.column_stack([grid_cells(4, 4), np.full(16, 3.0)])
    ref, _ = krige_dense(five, z[:5], MODEL, tg)
    got = krige3d(five, z[:5], MODEL, 4, 4, [3.0])[0].reshape(-1)
    assert np.max(np.abs(got - ref)) < 1e-10


def test_forecast_3d_shape(rng):
    pts = _points(rng, 10).astype(int)
    frames = [SensorFrame(pts, rng.normal(size=(10, 1))) for _ in range(3)]
    out = kriging_forecast_3d(frames, 8, 8, 3, nlags=5)
    assert out.shape == (3, 8, 8, 1) and np.isfinite(out).all()


def test_exact_at_data_even_with_nugget(rng):
    pts = _points(rng, 9)
    z = rng.normal(size=9)
    est, var = krige2d(pts, z, VariogramModel(1.0, 6.0, 0.4), 16, 16)
    idx = pts.astype(int)
    assert np.max(np.abs(est[idx[:, 0], idx[:, 1]] - z)) < 1e-10
    assert np.max(np.abs(var[idx[:, 0], idx[:, 1]])) < 1e-10
