# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the routines in ``_pykernels``.

Expressions mirror the Python versions term by term; the extension is
built with ``-ffp-contract=off`` so no fused multiply-adds change results.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt, floor

from .errors import Diverged

cnp.import_array()

BACKEND = "cython"

DIVERGENCE_LIMIT = 1e6
cdef double _LIMIT = 1e6


cdef inline void _rk4(double* x, double a1, double b11, double b12,
                      double b32, double b33, double dt) noexcept nogil:
    cdef double hdt = dt * 0.5
    cdef double sdt = dt / 6.0
    cdef double x1 = x[0], x2 = x[1], x3 = x[2]
    cdef double y, s1, s2, s3
    cdef double k11, k12, k13, k21, k22, k23, k31, k32, k33, k41, k42, k43

    y = (fabs(x1 + 1.0) - fabs(x1 - 1.0)) * 0.5
    k11 = -x1 + a1 * y + b11 * x1 + b12 * x2
    k12 = -x2 + x1 + x3
    k13 = -x3 + b32 * x2 + b33 * x3

    s1 = x1 + hdt * k11
    s2 = x2 + hdt * k12
    s3 = x3 + hdt * k13
    y = (fabs(s1 + 1.0) - fabs(s1 - 1.0)) * 0.5
    k21 = -s1 + a1 * y + b11 * s1 + b12 * s2
    k22 = -s2 + s1 + s3
    k23 = -s3 + b32 * s2 + b33 * s3

    s1 = x1 + hdt * k21
    s2 = x2 + hdt * k22
    s3 = x3 + hdt * k23
    y = (fabs(s1 + 1.0) - fabs(s1 - 1.0)) * 0.5
    k31 = -s1 + a1 * y + b11 * s1 + b12 * s2
    k32 = -s2 + s1 + s3
    k33 = -s3 + b32 * s2 + b33 * s3

    s1 = x1 + dt * k31
    s2 = x2 + dt * k32
    s3 = x3 + dt * k33
    y = (fabs(s1 + 1.0) - fabs(s1 - 1.0)) * 0.5
    k41 = -s1 + a1 * y + b11 * s1 + b12 * s2
    k42 = -s2 + s1 + s3
    k43 = -s3 + b32 * s2 + b33 * s3

    x[0] = x1 + sdt * (k11 + 2.0 * k21 + 2.0 * k31 + k41)
    x[1] = x2 + sdt * (k12 + 2.0 * k22 + 2.0 * k32 + k42)
    x[2] = x3 + sdt * (k13 + 2.0 * k23 + 2.0 * k33 + k43)


cdef inline bint _bounded(double* x) noexcept nogil:
    return fabs(x[0]) <= _LIMIT and fabs(x[1]) <= _LIMIT and fabs(x[2]) <= _LIMIT


cdef inline unsigned char _fold(double v) noexcept nogil:
    cdef double u = v - floor(v)
    cdef unsigned long long bits = <unsigned long long>(u * 4294967296.0)
    cdef unsigned int w = 0, nib
    cdef int j
    for j in range(8):
        nib = <unsigned int>((bits >> (28 - 4 * j)) & 0xF)
        nib ^= nib >> 2
        nib ^= nib >> 1
        w = (w << 1) | (nib & 1)
    return <unsigned char>w


def byte_from_fraction(double v):
    return _fold(v)


def cnn_trajectory(double x1, double x2, double x3, Py_ssize_t n, double a1,
                   double b11, double b12, double b32, double b33, double dt):
    out = np.empty((n + 1, 3), dtype=np.float64)
    cdef double[:, ::1] o = out
    cdef double x[3]
    cdef Py_ssize_t i
    cdef Py_ssize_t bad = -1
    x[0] = x1
    x[1] = x2
    x[2] = x3
    o[0, 0] = x1
    o[0, 1] = x2
    o[0, 2] = x3
    with nogil:
        for i in range(1, n + 1):
            _rk4(x, a1, b11, b12, b32, b33, dt)
            if not _bounded(x):
                bad = i
                break
            o[i, 0] = x[0]
            o[i, 1] = x[1]
            o[i, 2] = x[2]
    if bad >= 0:
        raise Diverged(f"CNN state left |x| <= {DIVERGENCE_LIMIT:g} at step {bad}")
    return out


def cnn_keystream(double x1, double x2, double x3, Py_ssize_t n_discard,
                  Py_ssize_t count, double h, double lam, double a1, double b11,
                  double b12, double b32, double b33, double dt):
    out = np.empty(count, dtype=np.uint8)
    cdef unsigned char[::1] o = out
    cdef double x[3]
    cdef Py_ssize_t i
    cdef Py_ssize_t bad = -1
    cdef double v
    x[0] = x1
    x[1] = x2
    x[2] = x3
    with nogil:
        for i in range(n_discard):
            _rk4(x, a1, b11, b12, b32, b33, dt)
            if not _bounded(x):
                bad = i + 1
                break
        if bad < 0:
            for i in range(count):
                _rk4(x, a1, b11, b12, b32, b33, dt)
                if not _bounded(x):
                    bad = n_discard + i + 1
                    break
                v = h * sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) + lam
                o[i] = _fold(v)
    if bad >= 0:
        raise Diverged(f"CNN state left |x| <= {DIVERGENCE_LIMIT:g} at step {bad}")
    return out


def refine_extrema(dog, cand, double contrast, double edge_r, int max_hops):
    cdef double[:, :, ::1] D = np.ascontiguousarray(dog, dtype=np.float64)
    cdef long long[:, ::1] C = np.ascontiguousarray(
        np.asarray(cand, dtype=np.int64).reshape(-1, 3))
    cdef Py_ssize_t S = D.shape[0], H = D.shape[1], W = D.shape[2]
    cdef Py_ssize_t n = C.shape[0], row, m = 0
    cdef double edge_limit = (edge_r + 1.0) * (edge_r + 1.0) / edge_r
    locs_arr = np.empty((n, 3), dtype=np.int64)
    vals_arr = np.empty((n, 4), dtype=np.float64)
    cdef long long[:, ::1] locs = locs_arr
    cdef double[:, ::1] vals = vals_arr
    cdef Py_ssize_t s, y, x
    cdef int hops
    cdef bint ok
    cdef double v, dx, dy, ds, v2, dxx, dyy, dss, dxy, dxs, dys
    cdef double i00, i01, i02, i11, i12, i22, det, ox, oy, os_, dval, tr, det2

    with nogil:
        for row in range(n):
            s = C[row, 0]
            y = C[row, 1]
            x = C[row, 2]
            hops = 0
            ok = False
            while True:
                if s < 1 or s > S - 2 or y < 1 or y > H - 2 or x < 1 or x > W - 2:
                    break
                v = D[s, y, x]
                dx = (D[s, y, x + 1] - D[s, y, x - 1]) * 0.5
                dy = (D[s, y + 1, x] - D[s, y - 1, x]) * 0.5
                ds = (D[s + 1, y, x] - D[s - 1, y, x]) * 0.5
                v2 = v * 2.0
                dxx = D[s, y, x + 1] + D[s, y, x - 1] - v2
                dyy = D[s, y + 1, x] + D[s, y - 1, x] - v2
                dss = D[s + 1, y, x] + D[s - 1, y, x] - v2
                dxy = ((D[s, y + 1, x + 1] - D[s, y + 1, x - 1])
                       - (D[s, y - 1, x + 1] - D[s, y - 1, x - 1])) * 0.25
                dxs = ((D[s + 1, y, x + 1] - D[s + 1, y, x - 1])
                       - (D[s - 1, y, x + 1] - D[s - 1, y, x - 1])) * 0.25
                dys = ((D[s + 1, y + 1, x] - D[s + 1, y - 1, x])
                       - (D[s - 1, y + 1, x] - D[s - 1, y - 1, x])) * 0.25

                i00 = dyy * dss - dys * dys
                i01 = dxs * dys - dxy * dss
                i02 = dxy * dys - dxs * dyy
                i11 = dxx * dss - dxs * dxs
                i12 = dxy * dxs - dxx * dys
                i22 = dxx * dyy - dxy * dxy
                det = dxx * i00 + dxy * i01 + dxs * i02
                if det == 0.0:
                    break
                ox = -(i00 * dx + i01 * dy + i02 * ds) / det
                oy = -(i01 * dx + i11 * dy + i12 * ds) / det
                os_ = -(i02 * dx + i12 * dy + i22 * ds) / det
                if not (fabs(ox) < 1e9 and fabs(oy) < 1e9 and fabs(os_) < 1e9):
                    break
                if fabs(ox) <= 0.5 and fabs(oy) <= 0.5 and fabs(os_) <= 0.5:
                    ok = True
                    break
                if hops >= max_hops:
                    break
                hops += 1
                x += <Py_ssize_t>floor(ox + 0.5)
                y += <Py_ssize_t>floor(oy + 0.5)
                s += <Py_ssize_t>floor(os_ + 0.5)
            if not ok:
                continue
            dval = v + 0.5 * (dx * ox + dy * oy + ds * os_)
            if fabs(dval) < contrast:
                continue
            tr = dxx + dyy
            det2 = dxx * dyy - dxy * dxy
            if det2 <= 0.0 or tr * tr / det2 >= edge_limit:
                continue
            locs[m, 0] = s
            locs[m, 1] = y
            locs[m, 2] = x
            vals[m, 0] = ox
            vals[m, 1] = oy
            vals[m, 2] = os_
            vals[m, 3] = dval
            m += 1
    return locs_arr[:m].copy(), vals_arr[:m].copy()
