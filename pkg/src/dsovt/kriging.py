"""Ordinary Kriging baselines with a spherical variogram.

``krige2d`` interpolates one snapshot; ``kriging_forecast_2d`` kriges every
input step and extrapolates a per-cell least-squares line. ``krige3d``
treats (i, j, t) as one isotropic space-time domain.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import LinAlgWarning, lu_factor, lu_solve
from scipy.optimize import least_squares
from scipy.spatial.distance import cdist, pdist

from dsovt.errors import ConditioningError, ContractError, ShapeError, ValidationError

log = logging.getLogger(__name__)

_COND_LIMIT = 1e12
_CHUNK = 8192


@dataclass(frozen=True)
class VariogramModel:
    """Spherical semivariogram ``nugget + sill * (1.5 r - 0.5 r^3)``, with
    ``r = d / range`` capped at 1."""

    sill: float
    range: float
    nugget: float = 0.0
    nlags: int = 20
    kind: str = "spherical"
    degenerate: bool = False
    lag_centers: np.ndarray | None = field(default=None, compare=False, repr=False)
    lag_gamma: np.ndarray | None = field(default=None, compare=False, repr=False)
    lag_counts: np.ndarray | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind != "spherical":
            raise ValidationError(f"unsupported variogram kind {self.kind!r}")
        if self.sill < 0 or self.nugget < 0 or not self.range > 0:
            raise ValidationError(f"need sill >= 0, nugget >= 0, range > 0; got {self}")

    def __call__(self, d):
        r = np.minimum(np.asarray(d, dtype=np.float64) / self.range, 1.0)
        return self.nugget + self.sill * (1.5 * r - 0.5 * r ** 3)


def spherical(d, sill, rng, nugget):
    r = np.minimum(np.asarray(d, dtype=np.float64) / rng, 1.0)
    return nugget + sill * (1.5 * r - 0.5 * r ** 3)


def empirical_semivariogram(points, values, nlags):
    """Bin the half squared differences of all pairs into ``nlags`` equal-width
    distance bins on [0, max distance]. Empty bins have gamma NaN."""
    pts = np.asarray(points, dtype=np.float64)
    z = np.asarray(values, dtype=np.float64).reshape(-1)
    d = pdist(pts)
    sv = 0.5 * pdist(z[:, None], "sqeuclidean")
    dmax = d.max()
    edges = np.linspace(0.0, dmax, nlags + 1)
    idx = np.minimum(np.searchsorted(edges, d, side="right") - 1, nlags - 1)
    counts = np.bincount(idx, minlength=nlags)
    sums = np.bincount(idx, weights=sv, minlength=nlags)
    with np.errstate(invalid="ignore", divide="ignore"):
        gamma = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    centers = 0.5 * (edges[:-1] + edges[1:])
    return centers, gamma, counts


def fit_variogram(points, values, nlags=20):
    """Least-squares spherical fit to the binned empirical semivariogram.

    Constant values give a nugget-only model flagged ``degenerate``; away
    from the data it predicts the plain mean, which is exact for flat data.
    """
    pts = np.asarray(points, dtype=np.float64)
    z = np.asarray(values, dtype=np.float64).reshape(-1)
    if pts.ndim != 2 or len(pts) != len(z):
        raise ShapeError(f"points {pts.shape} and values {z.shape} disagree")
    if len(z) < 3:
        raise ValidationError(f"fit_variogram needs >= 3 points, got {len(z)}")
    if nlags < 1:
        raise ValidationError("nlags must be >= 1")
    centers, gamma, counts = empirical_semivariogram(pts, z, nlags)
    if np.ptp(z) == 0:
        log.warning("flat field: falling back to a nugget-only variogram")
        return VariogramModel(0.0, float(max(centers[-1], 1.0)), 1.0, nlags, degenerate=True,
                              lag_centers=centers, lag_gamma=gamma, lag_counts=counts)
    ok = counts > 0
    x, y = centers[ok], gamma[ok]
    gmax = float(y.max())
    xmax = float(centers[-1] + (centers[1] - centers[0]) / 2 if nlags > 1 else 2 * centers[0])
    p0 = [max(gmax - y.min(), 1e-12), 0.25 * xmax + 1e-9, max(float(y.min()), 0.0)]
    lo, hi = [0.0, 1e-9, 0.0], [10.0 * gmax + 1e-12, xmax, gmax + 1e-12]
    p0 = np.clip(p0, lo, hi)
    res = least_squares(lambda p: spherical(x, *p) - y, p0, bounds=(lo, hi))
    sill, rng, nugget = (float(v) for v in res.x)
    return VariogramModel(sill, rng, nugget, nlags, lag_centers=centers, lag_gamma=gamma,
                          lag_counts=counts)


def merge_duplicates(points, values):
    """Average values sharing a coordinate; warns when any were merged."""
    pts = np.asarray(points, dtype=np.float64)
    z = np.asarray(values, dtype=np.float64)
    uniq, inv = np.unique(pts, axis=0, return_inverse=True)
    inv = inv.reshape(-1)
    if len(uniq) == len(pts):
        return pts, z
    warnings.warn(f"{len(pts) - len(uniq)} duplicate Kriging points averaged", RuntimeWarning)
    counts = np.bincount(inv)
    if z.ndim == 1:
        merged = np.bincount(inv, weights=z) / counts
    else:
        merged = np.stack([np.bincount(inv, weights=z[:, c]) / counts for c in range(z.shape[1])], axis=1)
    return uniq, merged


class OrdinaryKriging:
    """One LU factorization of the (K+1) system, reused for every target."""

    def __init__(self, points, values, model, duplicates="average"):
        pts = np.asarray(points, dtype=np.float64)
        z = np.asarray(values, dtype=np.float64).reshape(-1)
        if len(pts) != len(z):
            raise ShapeError(f"{len(pts)} points but {len(z)} values")
        if duplicates == "average":
            pts, z = merge_duplicates(pts, z)
        elif len(np.unique(pts, axis=0)) != len(pts):
            raise ConditioningError("duplicate Kriging points make the system singular")
        self.points, self.values, self.model = pts, z, model
        self.matrix = kriging_matrix(pts, model)
        cond = np.linalg.cond(self.matrix)
        if not np.isfinite(cond) or cond > _COND_LIMIT:
            raise ConditioningError(f"Kriging system is ill-conditioned (cond={cond:.3g})")
        with warnings.catch_warnings():
            warnings.simplefilter("error", LinAlgWarning)
            try:
                self.lu = lu_factor(self.matrix)
            except (LinAlgWarning, np.linalg.LinAlgError, ValueError) as exc:
                raise ConditioningError(f"Kriging system is singular: {exc}") from exc

    def weights(self, targets):
        """(K, N) weights and (N,) Lagrange multipliers for ``targets``."""
        rhs = self._rhs(np.asarray(targets, dtype=np.float64))
        sol = lu_solve(self.lu, rhs)
        return sol[:-1], sol[-1]

    def _rhs(self, targets):
        k = len(self.points)
        rhs = np.ones((k + 1, len(targets)))
        rhs[:k] = _gamma(self.model, cdist(self.points, targets))
        return rhs

    def predict(self, targets):
        targets = np.asarray(targets, dtype=np.float64)
        est = np.empty(len(targets))
        var = np.empty(len(targets))
        for s in range(0, len(targets), _CHUNK):
            t = targets[s:s + _CHUNK]
            rhs = self._rhs(t)
            sol = lu_solve(self.lu, rhs)
            est[s:s + _CHUNK] = self.values @ sol[:-1]
            var[s:s + _CHUNK] = np.einsum("kn,kn->n", sol, rhs)
        return est, var


def _gamma(model, d):
    """Semivariance for the Kriging system: the nugget is a jump just above
    zero lag, so coincident locations get 0 and data points are honoured."""
    return np.where(d == 0.0, 0.0, model(d))


def kriging_matrix(points, model):
    """[[Gamma, 1], [1^T, 0]] with a zero diagonal (gamma at zero lag)."""
    k = len(points)
    a = np.zeros((k + 1, k + 1))
    g = _gamma(model, cdist(points, points))
    np.fill_diagonal(g, 0.0)
    a[:k, :k] = g
    a[:k, k] = a[k, :k] = 1.0
    return a


def grid_cells(nx, ny):
    i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="ij")
    return np.stack([i.ravel(), j.ravel()], axis=1).astype(np.float64)


def krige2d(points, values, model, nx, ny, duplicates="average"):
    """Ordinary Kriging onto an nx x ny grid; returns (estimate, variance)."""
    ok = OrdinaryKriging(points, values, model, duplicates)
    est, var = ok.predict(grid_cells(nx, ny))
    return est.reshape(nx, ny), var.reshape(nx, ny)


def krige_dense(points, values, model, targets):
    """Per-target dense solves with numpy; slow reference for the LU path."""
    pts = np.asarray(points, dtype=np.float64)
    z = np.asarray(values, dtype=np.float64)
    a = kriging_matrix(pts, model)
    est, weights = [], []
    for t in np.asarray(targets, dtype=np.float64):
        d = np.sqrt(((pts - t) ** 2).sum(axis=1))
        b = np.append(np.where(d == 0.0, 0.0, model(d)), 1.0)
        w = np.linalg.solve(a, b)
        weights.append(w[:-1])
        est.append(float(w[:-1] @ z))
    return np.array(est), np.array(weights)


def _frame_arrays(frame):
    pos = np.asarray(frame.positions if hasattr(frame, "positions") else frame[0], dtype=np.float64)
    vals = np.asarray(frame.values if hasattr(frame, "values") else frame[1], dtype=np.float64)
    return pos, vals.reshape(len(pos), -1)


def linear_extrapolate(stack, s_out):
    """Per-cell OLS line through ``stack`` (S_in, ...) at t = 0..S_in-1,
    evaluated at t = S_in .. S_in + s_out - 1."""
    s_in = stack.shape[0]
    t = np.arange(s_in, dtype=np.float64)
    tc = t - t.mean()
    mean = stack.mean(axis=0)
    slope = np.tensordot(tc, stack - mean, axes=(0, 0)) / (tc @ tc)
    ahead = np.arange(s_in, s_in + s_out, dtype=np.float64) - t.mean()
    return mean[None] + ahead.reshape(-1, *([1] * mean.ndim)) * slope[None]


def kriging_forecast_2d(frames, nx, ny, s_out, nlags=20):
    """Krige each input sensor frame, then extrapolate each cell linearly.

    ``frames`` are SensorFrames (or (positions, values) pairs), one per
    input step. Returns (s_out, nx, ny, nc).
    """
    if len(frames) < 2:
        raise ContractError(f"linear temporal regression needs >= 2 input steps, got {len(frames)}")
    kriged = []
    for frame in frames:
        pos, vals = _frame_arrays(frame)
        chans = []
        for c in range(vals.shape[1]):
            model = fit_variogram(pos, vals[:, c], nlags)
            chans.append(krige2d(pos, vals[:, c], model, nx, ny)[0])
        kriged.append(np.stack(chans, axis=-1))
    return linear_extrapolate(np.stack(kriged), s_out)


def krige3d(points, values, model, nx, ny, query_times, time_scale=1.0, duplicates="average"):
    """Space-time ordinary Kriging; ``points`` rows are (i, j, t).

    Returns (len(query_times), nx, ny) estimates.
    """
    pts = np.asarray(points, dtype=np.float64).copy()
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ShapeError(f"krige3d needs (N, 3) space-time points, got {pts.shape}")
    pts[:, 2] *= time_scale
    ok = OrdinaryKriging(pts, values, model, duplicates)
    cells = grid_cells(nx, ny)
    out = []
    for t in query_times:
        targets = np.column_stack([cells, np.full(len(cells), float(t) * time_scale)])
        out.append(ok.predict(targets)[0].reshape(nx, ny))
    return np.stack(out)


def kriging_forecast_3d(frames, nx, ny, s_out, nlags=5, time_scale=1.0):
    """Fit one space-time variogram on all input frames (times 0..S_in-1) and
    query times S_in..S_in+s_out-1. Returns (s_out, nx, ny, nc)."""
    pts, vals = [], []
    for t, frame in enumerate(frames):
        pos, v = _frame_arrays(frame)
        pts.append(np.column_stack([pos, np.full(len(pos), float(t))]))
        vals.append(v)
    pts = np.concatenate(pts)
    vals = np.concatenate(vals)
    scaled = pts.copy()
    scaled[:, 2] *= time_scale
    query = range(len(frames), len(frames) + s_out)
    chans = []
    for c in range(vals.shape[1]):
        model = fit_variogram(scaled, vals[:, c], nlags)
        chans.append(krige3d(pts, vals[:, c], model, nx, ny, query, time_scale))
    return np.stack(chans, axis=-1)
