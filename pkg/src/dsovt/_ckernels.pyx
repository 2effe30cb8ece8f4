# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: nearest-sensor ownership and the shallow-water step.

Arithmetic follows ``_pykernels`` term by term; build without fast-math or
FMA contraction so both backends agree bitwise.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, fabs, isfinite

cnp.import_array()


def nearest_owner(points, Py_ssize_t nx, Py_ssize_t ny):
    cdef cnp.int64_t[:, ::1] pts = np.ascontiguousarray(points, dtype=np.int64)
    cdef Py_ssize_t k = pts.shape[0]
    owner_arr = np.empty((nx, ny), dtype=np.int32)
    cdef cnp.int32_t[:, ::1] owner = owner_arr
    cdef Py_ssize_t i, j, q, best
    cdef cnp.int64_t di, dj, d, dmin
    with nogil:
        for i in range(nx):
            for j in range(ny):
                best = 0
                di = i - pts[0, 0]
                dj = j - pts[0, 1]
                dmin = di * di + dj * dj
                for q in range(1, k):
                    di = i - pts[q, 0]
                    dj = j - pts[q, 1]
                    d = di * di + dj * dj
                    if d < dmin:
                        dmin = d
                        best = q
                owner[i, j] = <cnp.int32_t>best
    return owner_arr


cdef inline void _face_flux(double hl, double nl, double tl,
                            double hr, double nr, double tr, double g,
                            double* f1, double* f2, double* f3) noexcept nogil:
    cdef double ul = nl / hl
    cdef double ur = nr / hr
    cdef double fl2 = nl * ul + 0.5 * g * hl * hl
    cdef double fr2 = nr * ur + 0.5 * g * hr * hr
    cdef double fl3 = tl * ul
    cdef double fr3 = tr * ur
    cdef double al = fabs(ul) + sqrt(g * hl)
    cdef double ar = fabs(ur) + sqrt(g * hr)
    cdef double a = al if al >= ar else ar
    f1[0] = 0.5 * (nl + nr) - 0.5 * a * (hr - hl)
    f2[0] = 0.5 * (fl2 + fr2) - 0.5 * a * (nr - nl)
    f3[0] = 0.5 * (fl3 + fr3) - 0.5 * a * (tr - tl)


cdef void _step(double[:, ::1] h, double[:, ::1] hu, double[:, ::1] hv,
                double[:, ::1] fh, double[:, ::1] fu, double[:, ::1] fv,
                double[:, ::1] gh, double[:, ::1] gu, double[:, ::1] gv,
                double dt, double g) noexcept nogil:
    cdef Py_ssize_t nx = h.shape[0]
    cdef Py_ssize_t ny = h.shape[1]
    cdef Py_ssize_t i, j
    cdef double a1, a2, a3
    # x faces i = 0..nx, face i sits between cells i-1 and i
    for j in range(ny):
        _face_flux(h[0, j], -hu[0, j], hv[0, j], h[0, j], hu[0, j], hv[0, j], g, &a1, &a2, &a3)
        fh[0, j] = a1; fu[0, j] = a2; fv[0, j] = a3
        for i in range(1, nx):
            _face_flux(h[i - 1, j], hu[i - 1, j], hv[i - 1, j], h[i, j], hu[i, j], hv[i, j],
                       g, &a1, &a2, &a3)
            fh[i, j] = a1; fu[i, j] = a2; fv[i, j] = a3
        _face_flux(h[nx - 1, j], hu[nx - 1, j], hv[nx - 1, j],
                   h[nx - 1, j], -hu[nx - 1, j], hv[nx - 1, j], g, &a1, &a2, &a3)
        fh[nx, j] = a1; fu[nx, j] = a2; fv[nx, j] = a3
    # y faces, hv is the normal momentum
    for i in range(nx):
        _face_flux(h[i, 0], -hv[i, 0], hu[i, 0], h[i, 0], hv[i, 0], hu[i, 0], g, &a1, &a2, &a3)
        gh[i, 0] = a1; gv[i, 0] = a2; gu[i, 0] = a3
        for j in range(1, ny):
            _face_flux(h[i, j - 1], hv[i, j - 1], hu[i, j - 1], h[i, j], hv[i, j], hu[i, j],
                       g, &a1, &a2, &a3)
            gh[i, j] = a1; gv[i, j] = a2; gu[i, j] = a3
        _face_flux(h[i, ny - 1], hv[i, ny - 1], hu[i, ny - 1],
                   h[i, ny - 1], -hv[i, ny - 1], hu[i, ny - 1], g, &a1, &a2, &a3)
        gh[i, ny] = a1; gv[i, ny] = a2; gu[i, ny] = a3
    for i in range(nx):
        for j in range(ny):
            h[i, j] = h[i, j] - dt * ((fh[i + 1, j] - fh[i, j]) + (gh[i, j + 1] - gh[i, j]))
            hu[i, j] = hu[i, j] - dt * ((fu[i + 1, j] - fu[i, j]) + (gu[i, j + 1] - gu[i, j]))
            hv[i, j] = hv[i, j] - dt * ((fv[i + 1, j] - fv[i, j]) + (gv[i, j + 1] - gv[i, j]))


cdef bint _healthy(double[:, ::1] h, double[:, ::1] hu, double[:, ::1] hv) noexcept nogil:
    cdef Py_ssize_t i, j
    for i in range(h.shape[0]):
        for j in range(h.shape[1]):
            if not (h[i, j] > 0.0) or not isfinite(hu[i, j]) or not isfinite(hv[i, j]):
                return False
    return True


def lf_step(h, hu, hv, double dt, double g):
    out = lf_advance(h, hu, hv, dt, g, 1)
    return out[0], out[1], out[2]


def lf_advance(h, hu, hv, double dt, double g, long nsteps):
    h_arr = np.array(h, dtype=np.float64, order="C")
    hu_arr = np.array(hu, dtype=np.float64, order="C")
    hv_arr = np.array(hv, dtype=np.float64, order="C")
    cdef Py_ssize_t nx = h_arr.shape[0]
    cdef Py_ssize_t ny = h_arr.shape[1]
    cdef double[:, ::1] hm = h_arr
    cdef double[:, ::1] um = hu_arr
    cdef double[:, ::1] vm = hv_arr
    cdef double[:, ::1] fh = np.empty((nx + 1, ny))
    cdef double[:, ::1] fu = np.empty((nx + 1, ny))
    cdef double[:, ::1] fv = np.empty((nx + 1, ny))
    cdef double[:, ::1] gh = np.empty((nx, ny + 1))
    cdef double[:, ::1] gu = np.empty((nx, ny + 1))
    cdef double[:, ::1] gv = np.empty((nx, ny + 1))
    cdef long n
    cdef long bad = -1
    with nogil:
        for n in range(nsteps):
            _step(hm, um, vm, fh, fu, fv, gh, gu, gv, dt, g)
            if not _healthy(hm, um, vm):
                bad = n
                break
    return h_arr, hu_arr, hv_arr, bad
