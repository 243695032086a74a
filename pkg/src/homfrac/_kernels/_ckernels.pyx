# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled interpolation kernels.

Same arithmetic, in the same order, as _numpy_impl.py; the build disables
FP contraction so results are bit-identical to the fallback.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()

BACKEND = "cython"


def periodic_ml_interp(values, pts):
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    cdef int d = values.ndim
    out = np.empty(pts.shape[0], dtype=np.float64)
    if d == 1:
        _periodic_1d(values, pts, out)
    elif d == 2:
        _periodic_2d(values, pts, out)
    elif d == 3:
        _periodic_3d(values, pts, out)
    else:
        raise ValueError(f"unsupported dimension {d}")
    return out


def box_ml_interp(values, corner, spacing, pts):
    pts = np.ascontiguousarray(pts, dtype=np.float64)
    values = np.ascontiguousarray(values, dtype=np.float64)
    corner = np.ascontiguousarray(corner, dtype=np.float64)
    spacing = np.ascontiguousarray(spacing, dtype=np.float64)
    cdef int d = values.ndim
    out = np.empty(pts.shape[0], dtype=np.float64)
    if d == 1:
        _box_1d(values, corner, spacing, pts, out)
    elif d == 2:
        _box_2d(values, corner, spacing, pts, out)
    elif d == 3:
        _box_3d(values, corner, spacing, pts, out)
    else:
        raise ValueError(f"unsupported dimension {d}")
    return out


cdef inline Py_ssize_t _wrap(Py_ssize_t i, Py_ssize_t n) nogil:
    i = i % n
    if i < 0:
        i += n
    return i


cdef void _periodic_1d(double[::1] v, double[:, ::1] pts, double[::1] out) nogil:
    cdef Py_ssize_t k, i0, i1, n = v.shape[0]
    cdef double p, fx
    for k in range(pts.shape[0]):
        p = pts[k, 0] * n
        i0 = <Py_ssize_t>floor(p)
        fx = p - i0
        i0 = _wrap(i0, n)
        i1 = _wrap(i0 + 1, n)
        out[k] = v[i0] * (1.0 - fx) + v[i1] * fx


cdef void _periodic_2d(double[:, ::1] v, double[:, ::1] pts, double[::1] out) nogil:
    cdef Py_ssize_t k, a0, a1, b0, b1, n = v.shape[0]
    cdef double p, fx, fy, c0, c1
    for k in range(pts.shape[0]):
        p = pts[k, 0] * n
        a0 = <Py_ssize_t>floor(p)
        fx = p - a0
        p = pts[k, 1] * n
        b0 = <Py_ssize_t>floor(p)
        fy = p - b0
        a0 = _wrap(a0, n)
        a1 = _wrap(a0 + 1, n)
        b0 = _wrap(b0, n)
        b1 = _wrap(b0 + 1, n)
        c0 = v[a0, b0] * (1.0 - fx) + v[a1, b0] * fx
        c1 = v[a0, b1] * (1.0 - fx) + v[a1, b1] * fx
        out[k] = c0 * (1.0 - fy) + c1 * fy


cdef void _periodic_3d(double[:, :, ::1] v, double[:, ::1] pts, double[::1] out) nogil:
    cdef Py_ssize_t k, a0, a1, b0, b1, c0i, c1i, n = v.shape[0]
    cdef double p, fx, fy, fz, e00, e10, e01, e11, g0, g1
    for k in range(pts.shape[0]):
        p = pts[k, 0] * n
        a0 = <Py_ssize_t>floor(p)
        fx = p - a0
        p = pts[k, 1] * n
        b0 = <Py_ssize_t>floor(p)
        fy = p - b0
        p = pts[k, 2] * n
        c0i = <Py_ssize_t>floor(p)
        fz = p - c0i
        a0 = _wrap(a0, n)
        a1 = _wrap(a0 + 1, n)
        b0 = _wrap(b0, n)
        b1 = _wrap(b0 + 1, n)
        c0i = _wrap(c0i, n)
        c1i = _wrap(c0i + 1, n)
        e00 = v[a0, b0, c0i] * (1.0 - fx) + v[a1, b0, c0i] * fx
        e10 = v[a0, b1, c0i] * (1.0 - fx) + v[a1, b1, c0i] * fx
        e01 = v[a0, b0, c1i] * (1.0 - fx) + v[a1, b0, c1i] * fx
        e11 = v[a0, b1, c1i] * (1.0 - fx) + v[a1, b1, c1i] * fx
        g0 = e00 * (1.0 - fy) + e10 * fy
        g1 = e01 * (1.0 - fy) + e11 * fy
        out[k] = g0 * (1.0 - fz) + g1 * fz


cdef inline Py_ssize_t _clampi(Py_ssize_t i, Py_ssize_t lo, Py_ssize_t hi) nogil:
    if i < lo:
        return lo
    if i > hi:
        return hi
    return i


cdef inline double _clampf(double f) nogil:
    if f < 0.0:
        return 0.0
    if f > 1.0:
        return 1.0
    return f


cdef void _box_1d(double[::1] v, double[::1] corner, double[::1] sp,
                  double[:, ::1] pts, double[::1] out) nogil:
    cdef Py_ssize_t k, a0, n = v.shape[0]
    cdef double p, fx
    for k in range(pts.shape[0]):
        p = (pts[k, 0] - corner[0]) / sp[0]
        a0 = _clampi(<Py_ssize_t>floor(p), 0, n - 2)
        fx = _clampf(p - a0)
        out[k] = v[a0] * (1.0 - fx) + v[a0 + 1] * fx


cdef void _box_2d(double[:, ::1] v, double[::1] corner, double[::1] sp,
                  double[:, ::1] pts, double[::1] out) nogil:
    cdef Py_ssize_t k, a0, b0, n0 = v.shape[0], n1 = v.shape[1]
    cdef double p, fx, fy, c0, c1
    for k in range(pts.shape[0]):
        p = (pts[k, 0] - corner[0]) / sp[0]
        a0 = _clampi(<Py_ssize_t>floor(p), 0, n0 - 2)
        fx = _clampf(p - a0)
        p = (pts[k, 1] - corner[1]) / sp[1]
        b0 = _clampi(<Py_ssize_t>floor(p), 0, n1 - 2)
        fy = _clampf(p - b0)
        c0 = v[a0, b0] * (1.0 - fx) + v[a0 + 1, b0] * fx
        c1 = v[a0, b0 + 1] * (1.0 - fx) + v[a0 + 1, b0 + 1] * fx
        out[k] = c0 * (1.0 - fy) + c1 * fy


cdef void _box_3d(double[:, :, ::1] v, double[::1] corner, double[::1] sp,
                  double[:, ::1] pts, double[::1] out) nogil:
    cdef Py_ssize_t k, a0, b0, c0i
    cdef Py_ssize_t n0 = v.shape[0], n1 = v.shape[1], n2 = v.shape[2]
    cdef double p, fx, fy, fz, e00, e10, e01, e11, g0, g1
    for k in range(pts.shape[0]):
        p = (pts[k, 0] - corner[0]) / sp[0]
        a0 = _clampi(<Py_ssize_t>floor(p), 0, n0 - 2)
        fx = _clampf(p - a0)
        p = (pts[k, 1] - corner[1]) / sp[1]
        b0 = _clampi(<Py_ssize_t>floor(p), 0, n1 - 2)
        fy = _clampf(p - b0)
        p = (pts[k, 2] - corner[2]) / sp[2]
        c0i = _clampi(<Py_ssize_t>floor(p), 0, n2 - 2)
        fz = _clampf(p - c0i)
        e00 = v[a0, b0, c0i] * (1.0 - fx) + v[a0 + 1, b0, c0i] * fx
        e10 = v[a0, b0 + 1, c0i] * (1.0 - fx) + v[a0 + 1, b0 + 1, c0i] * fx
        e01 = v[a0, b0, c0i + 1] * (1.0 - fx) + v[a0 + 1, b0, c0i + 1] * fx
        e11 = v[a0, b0 + 1, c0i + 1] * (1.0 - fx) + v[a0 + 1, b0 + 1, c0i + 1] * fx
        g0 = e00 * (1.0 - fy) + e10 * fy
        g1 = e01 * (1.0 - fy) + e11 * fy
        out[k] = g0 * (1.0 - fz) + g1 * fz
