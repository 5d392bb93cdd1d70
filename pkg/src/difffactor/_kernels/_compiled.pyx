# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled evaluation kernels (hot inner loops of compose/invert/flow).

Same contracts as _ref.py: coefficient arrays carry a periodic halo of
degree+1 trailing entries per axis so tap loops never wrap, and tap weights
come from the precomputed piecewise-polynomial tables in _ref (evaluated by
Horner in the same order, so both backends produce identical doubles).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

from . import _ref

cnp.import_array()

BACKEND = "compiled"

DEF MAX_TAPS = 16

_TABLES = {}


cdef cnp.ndarray _table(int p):
    tab = _TABLES.get(p)
    if tab is None:
        tab = np.ascontiguousarray(_ref.weight_polys(p))
        _TABLES[p] = tab
    return <cnp.ndarray> tab


cdef inline void _weights(double frac, int p, const double* tab, double* b) noexcept nogil:
    cdef int j, d
    cdef const double* row
    cdef double acc
    cdef double s = frac - 0.5
    for j in range(p + 1):
        row = tab + j * (p + 1)
        acc = row[p]
        for d in range(p - 1, -1, -1):
            acc = acc * s + row[d]
        b[j] = acc


cdef inline double _eval1(const double* padded, Py_ssize_t m, int p,
                          const double* tab, double pt) noexcept nogil:
    cdef double b[MAX_TAPS]
    cdef double t = pt * m
    cdef double fbase = floor(t)
    cdef Py_ssize_t i0 = ((<Py_ssize_t> fbase) - (p - 1) // 2) % m
    cdef Py_ssize_t j
    cdef double acc = 0.0
    if i0 < 0:
        i0 += m
    _weights(t - fbase, p, tab, b)
    for j in range(p + 1):
        acc += b[j] * padded[i0 + j]
    return acc


def spline_eval_1d(cnp.ndarray[cnp.float64_t, ndim=1] padded, Py_ssize_t m,
                   cnp.ndarray[cnp.float64_t, ndim=1] pts, int degree):
    cdef Py_ssize_t n = pts.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef const double* c = <const double*> cnp.PyArray_DATA(padded)
    cdef const double* x = <const double*> cnp.PyArray_DATA(pts)
    cdef const double* tab = <const double*> cnp.PyArray_DATA(_table(degree))
    cdef double* o = <double*> cnp.PyArray_DATA(out)
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            o[i] = _eval1(c, m, degree, tab, x[i])
    return out


def spline_eval_1d_batch(cnp.ndarray[cnp.float64_t, ndim=2] padded, Py_ssize_t m,
                         cnp.ndarray[cnp.float64_t, ndim=2] pts, int degree):
    cdef Py_ssize_t nrows = padded.shape[0]
    cdef Py_ssize_t stride = padded.shape[1]
    cdef Py_ssize_t n = pts.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=2] out = np.empty((nrows, n), dtype=np.float64)
    cdef const double* c = <const double*> cnp.PyArray_DATA(padded)
    cdef const double* x = <const double*> cnp.PyArray_DATA(pts)
    cdef const double* tab = <const double*> cnp.PyArray_DATA(_table(degree))
    cdef double* o = <double*> cnp.PyArray_DATA(out)
    cdef Py_ssize_t r, i
    with nogil:
        for r in range(nrows):
            for i in range(n):
                o[r * n + i] = _eval1(c + r * stride, m, degree, tab, x[r * n + i])
    return out


def spline_eval_2d(cnp.ndarray[cnp.float64_t, ndim=2] padded,
                   Py_ssize_t mx, Py_ssize_t my,
                   cnp.ndarray[cnp.float64_t, ndim=1] x,
                   cnp.ndarray[cnp.float64_t, ndim=1] y, int degree):
    cdef Py_ssize_t stride = padded.shape[1]
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out = np.empty(n, dtype=np.float64)
    cdef const double* c = <const double*> cnp.PyArray_DATA(padded)
    cdef const double* xs = <const double*> cnp.PyArray_DATA(x)
    cdef const double* ys = <const double*> cnp.PyArray_DATA(y)
    cdef const double* tab = <const double*> cnp.PyArray_DATA(_table(degree))
    cdef double* o = <double*> cnp.PyArray_DATA(out)
    cdef double bx[MAX_TAPS]
    cdef double by[MAX_TAPS]
    cdef double tx, ty, fx, fy, acc, rowacc
    cdef Py_ssize_t i, j, k, ix0, iy0
    cdef const double* row
    cdef int p = degree
    with nogil:
        for i in range(n):
            tx = xs[i] * mx
            fx = floor(tx)
            ix0 = ((<Py_ssize_t> fx) - (p - 1) // 2) % mx
            if ix0 < 0:
                ix0 += mx
            _weights(tx - fx, p, tab, bx)
            ty = ys[i] * my
            fy = floor(ty)
            iy0 = ((<Py_ssize_t> fy) - (p - 1) // 2) % my
            if iy0 < 0:
                iy0 += my
            _weights(ty - fy, p, tab, by)
            acc = 0.0
            for j in range(p + 1):
                row = c + (ix0 + j) * stride + iy0
                rowacc = 0.0
                for k in range(p + 1):
                    rowacc += by[k] * row[k]
                acc += bx[j] * rowacc
            o[i] = acc
    return out


def spline_eval_2d_pair(cnp.ndarray[cnp.float64_t, ndim=2] padded_a,
                        cnp.ndarray[cnp.float64_t, ndim=2] padded_b,
                        Py_ssize_t mx, Py_ssize_t my,
                        cnp.ndarray[cnp.float64_t, ndim=1] x,
                        cnp.ndarray[cnp.float64_t, ndim=1] y, int degree):
    cdef Py_ssize_t stride = padded_a.shape[1]
    cdef Py_ssize_t n = x.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_a = np.empty(n, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] out_b = np.empty(n, dtype=np.float64)
    cdef const double* ca = <const double*> cnp.PyArray_DATA(padded_a)
    cdef const double* cb = <const double*> cnp.PyArray_DATA(padded_b)
    cdef const double* xs = <const double*> cnp.PyArray_DATA(x)
    cdef const double* ys = <const double*> cnp.PyArray_DATA(y)
    cdef const double* tab = <const double*> cnp.PyArray_DATA(_table(degree))
    cdef double* oa = <double*> cnp.PyArray_DATA(out_a)
    cdef double* ob = <double*> cnp.PyArray_DATA(out_b)
    cdef double bx[MAX_TAPS]
    cdef double by[MAX_TAPS]
    cdef double tx, ty, fx, fy, acc_a, acc_b, rowacc_a, rowacc_b, wk
    cdef Py_ssize_t i, j, k, ix0, iy0, off
    cdef int p = degree
    with nogil:
        for i in range(n):
            tx = xs[i] * mx
            fx = floor(tx)
            ix0 = ((<Py_ssize_t> fx) - (p - 1) // 2) % mx
            if ix0 < 0:
                ix0 += mx
            _weights(tx - fx, p, tab, bx)
            ty = ys[i] * my
            fy = floor(ty)
            iy0 = ((<Py_ssize_t> fy) - (p - 1) // 2) % my
            if iy0 < 0:
                iy0 += my
            _weights(ty - fy, p, tab, by)
            acc_a = 0.0
            acc_b = 0.0
            for j in range(p + 1):
                off = (ix0 + j) * stride + iy0
                rowacc_a = 0.0
                rowacc_b = 0.0
                for k in range(p + 1):
                    wk = by[k]
                    rowacc_a += wk * ca[off + k]
                    rowacc_b += wk * cb[off + k]
                acc_a += bx[j] * rowacc_a
                acc_b += bx[j] * rowacc_b
            oa[i] = acc_a
            ob[i] = acc_b
    return out_a, out_b


def orbit_lift(cnp.ndarray[cnp.float64_t, ndim=1] padded, Py_ssize_t m, int degree,
               double x0, long iterations):
    cdef const double* c = <const double*> cnp.PyArray_DATA(padded)
    cdef const double* tab = <const double*> cnp.PyArray_DATA(_table(degree))
    cdef double x = x0
    cdef long it
    with nogil:
        for it in range(iterations):
            x += _eval1(c, m, degree, tab, x - floor(x))
    return x
