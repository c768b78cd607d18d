# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-coordinate estimator kernels (same contracts as _kernels_py)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, pow

cnp.import_array()


def dense_terms(u, v, double sigma, cuts, coef, double gamma):
    cdef const double[::1] uu = np.ascontiguousarray(u, dtype=np.float64)
    cdef const double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef const double[::1] cc = np.ascontiguousarray(cuts, dtype=np.float64)
    cdef const double[:, ::1] B = np.ascontiguousarray(coef, dtype=np.float64)
    cdef Py_ssize_t n = uu.shape[0]
    cdef Py_ssize_t nblocks = B.shape[0]
    cdef Py_ssize_t kmax = B.shape[1]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    cdef Py_ssize_t i, l, j
    cdef double av, z, h_prev, h, tmp, acc
    with nogil:
        for i in range(n):
            av = fabs(vv[i])
            l = 0
            while l < nblocks and av > cc[l]:
                l += 1
            if l == nblocks:
                res[i] = pow(fabs(uu[i]), gamma)
                continue
            z = uu[i] / sigma
            h_prev = 1.0
            h = z
            acc = 0.0
            for j in range(1, 2 * kmax):
                tmp = z * h - j * h_prev
                h_prev = h
                h = tmp
                if j % 2 == 1:
                    acc = acc + B[l, (j - 1) // 2] * h
            res[i] = acc
    return out


def sparse_terms(y, double eps, double gamma, double alpha, double tau2):
    cdef const double[::1] yy = np.ascontiguousarray(y, dtype=np.float64)
    cdef Py_ssize_t n = yy.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] res = out
    cdef double shift = pow(eps, gamma) * alpha
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            if yy[i] * yy[i] > tau2:
                res[i] = pow(fabs(yy[i]), gamma) - shift
            else:
                res[i] = 0.0
    return out
