"""Pure NumPy implementations of the hot kernels.

These mirror ``_ckernels.pyx`` operation for operation so that both backends
produce the same floating-point results.
"""
import numpy as np

# cells per block when scanning owners; bounds the (cells, K) distance matrix
_OWNER_BLOCK = 4096


def nearest_owner(points, nx, ny):
    """Index of the nearest point for every cell of an ``nx`` x ``ny`` grid.

    Squared Euclidean distances on integer cell centres are exact, and
    ``argmin`` returns the first minimum, so ties go to the lowest index.
    """
    pts = np.ascontiguousarray(points, dtype=np.int64)
    owner = np.empty(nx * ny, dtype=np.int32)
    ii, jj = np.divmod(np.arange(nx * ny, dtype=np.int64), ny)
    for lo in range(0, nx * ny, _OWNER_BLOCK):
        hi = min(lo + _OWNER_BLOCK, nx * ny)
        di = ii[lo:hi, None] - pts[None, :, 0]
        dj = jj[lo:hi, None] - pts[None, :, 1]
        owner[lo:hi] = np.argmin(di * di + dj * dj, axis=1)
    return owner.reshape(nx, ny)


def _face_flux(hl, nl, tl, hr, nr, tr, g):
    # normal/tangential momentum n, t; returns (mass, normal, tangential) flux
    ul = nl / hl
    ur = nr / hr
    fl1 = nl
    fr1 = nr
    fl2 = nl * ul + 0.5 * g * hl * hl
    fr2 = nr * ur + 0.5 * g * hr * hr
    fl3 = tl * ul
    fr3 = tr * ur
    a = np.maximum(np.abs(ul) + np.sqrt(g * hl), np.abs(ur) + np.sqrt(g * hr))
    f1 = 0.5 * (fl1 + fr1) - 0.5 * a * (hr - hl)
    f2 = 0.5 * (fl2 + fr2) - 0.5 * a * (nr - nl)
    f3 = 0.5 * (fl3 + fr3) - 0.5 * a * (tr - tl)
    return f1, f2, f3


def lf_step(h, hu, hv, dt, g):
    """One local Lax-Friedrichs update with reflective walls (dx = dy = 1)."""
    # x faces: ghost cells mirror h and hv, negate hu
    hp = np.concatenate([h[:1], h, h[-1:]], axis=0)
    up = np.concatenate([-hu[:1], hu, -hu[-1:]], axis=0)
    vp = np.concatenate([hv[:1], hv, hv[-1:]], axis=0)
    fh, fu, fv = _face_flux(hp[:-1], up[:-1], vp[:-1], hp[1:], up[1:], vp[1:], g)

    hp = np.concatenate([h[:, :1], h, h[:, -1:]], axis=1)
    up = np.concatenate([hu[:, :1], hu, hu[:, -1:]], axis=1)
    vp = np.concatenate([-hv[:, :1], hv, -hv[:, -1:]], axis=1)
    gh, gv, gu = _face_flux(hp[:, :-1], vp[:, :-1], up[:, :-1], hp[:, 1:], vp[:, 1:], up[:, 1:], g)

    h_new = h - dt * ((fh[1:] - fh[:-1]) + (gh[:, 1:] - gh[:, :-1]))
    hu_new = hu - dt * ((fu[1:] - fu[:-1]) + (gu[:, 1:] - gu[:, :-1]))
    hv_new = hv - dt * ((fv[1:] - fv[:-1]) + (gv[:, 1:] - gv[:, :-1]))
    return h_new, hu_new, hv_new


def lf_advance(h, hu, hv, dt, g, nsteps):
    """Advance ``nsteps``; returns ``(h, hu, hv, bad)``.

    ``bad`` is -1 on success, otherwise the 0-based index of the first step
    that produced a non-positive or non-finite depth (state is left at that
    step's output).
    """
    h = np.array(h, dtype=np.float64, order="C")
    hu = np.array(hu, dtype=np.float64, order="C")
    hv = np.array(hv, dtype=np.float64, order="C")
    for n in range(nsteps):
        h, hu, hv = lf_step(h, hu, hv, dt, g)
        if not (np.all(h > 0.0) and np.isfinite(hu).all() and np.isfinite(hv).all()):
            return h, hu, hv, n
    return h, hu, hv, -1
