# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation kernels: Poisson-kernel quadrature sums and hyperbolic
Green sums. Mirrors kernels_py.py exactly (same math, same signatures); the
outer point loops run in parallel when OpenMP is available."""

import numpy as np
cimport numpy as cnp
from cython.parallel import prange
from libc.math cimport sqrt, M_PI

cnp.import_array()


def poisson_sum(cnp.ndarray[cnp.float64_t, ndim=2] nodes,
                cnp.ndarray[cnp.float64_t, ndim=1] weights,
                cnp.ndarray[cnp.float64_t, ndim=1] fvals,
                ys_in, bint need_grad):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] ys = np.atleast_2d(np.asarray(ys_in, dtype=np.float64))
    cdef Py_ssize_t m = ys.shape[0], n = nodes.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u = np.empty(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] grad = np.empty((m, 3) if need_grad else (1, 3))
    cdef double[:, ::1] ysv = np.ascontiguousarray(ys)
    cdef double[:, ::1] nodesv = np.ascontiguousarray(nodes)
    cdef double[::1] wv = np.ascontiguousarray(weights)
    cdef double[::1] fv = np.ascontiguousarray(fvals)
    cdef double[::1] uv = u
    cdef double[:, ::1] gv = grad
    cdef Py_ssize_t i, k
    cdef double y0, y1, y2, one_m_y2, d0, d1, d2c, d2sq, p, wp, s0, s1
    cdef double g00, g01, g02, g10, g11, g12, b0, b1, b2, f, inv, ui
    for i in prange(m, nogil=True, schedule="static"):
        y0 = ysv[i, 0]; y1 = ysv[i, 1]; y2 = ysv[i, 2]
        one_m_y2 = 1.0 - (y0 * y0 + y1 * y1 + y2 * y2)
        s0 = 0.0; s1 = 0.0
        g00 = 0.0; g01 = 0.0; g02 = 0.0; g10 = 0.0; g11 = 0.0; g12 = 0.0
        for k in range(n):
            d0 = y0 - nodesv[k, 0]; d1 = y1 - nodesv[k, 1]; d2c = y2 - nodesv[k, 2]
            d2sq = d0 * d0 + d1 * d1 + d2c * d2c
            p = one_m_y2 / d2sq
            wp = wv[k] * p * p
            f = fv[k]
            s0 = s0 + wp
            s1 = s1 + wp * f
            if need_grad:
                inv = -4.0 / d2sq
                b0 = inv * d0; b1 = inv * d1; b2 = inv * d2c
                g00 = g00 + wp * b0; g01 = g01 + wp * b1; g02 = g02 + wp * b2
                g10 = g10 + wp * b0 * f; g11 = g11 + wp * b1 * f; g12 = g12 + wp * b2 * f
        ui = s1 / s0
        uv[i] = ui
        if need_grad:
            # the node-independent term -4 y/(1-|y|^2) cancels between the
            # numerator and denominator sums of the normalized quotient
            gv[i, 0] = (g10 - ui * g00) / s0
            gv[i, 1] = (g11 - ui * g01) / s0
            gv[i, 2] = (g12 - ui * g02) / s0
    if need_grad:
        return u, grad
    return u, None


def green_sum(charges_in, double kappa, pts_in, bint need_grad):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] charges = np.atleast_2d(np.asarray(charges_in, dtype=np.float64))
    cdef cnp.ndarray[cnp.float64_t, ndim=2] pts = np.atleast_2d(np.asarray(pts_in, dtype=np.float64))
    cdef Py_ssize_t m = pts.shape[0], kk = charges.shape[0]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] vals = np.zeros(m)
    cdef cnp.ndarray[cnp.float64_t, ndim=2] grads = np.zeros((m, 3) if need_grad else (1, 3))
    cdef double[:, ::1] cv = np.ascontiguousarray(charges)
    cdef double[:, ::1] pv = np.ascontiguousarray(pts)
    cdef double[::1] valv = vals
    cdef double[:, ::1] gradv = grads
    cdef Py_ssize_t i, j
    cdef double scale = kappa / (4.0 * M_PI)
    cdef double z, q0, q1, q2, dz, d2, d3, s, c, rt, dgdc, inv
    for i in prange(m, nogil=True, schedule="static"):
        z = pv[i, 0]
        for j in range(kk):
            q0 = cv[j, 0]; q1 = cv[j, 1]; q2 = cv[j, 2]
            dz = z - q0
            d2 = pv[i, 1] - q1
            d3 = pv[i, 2] - q2
            s = dz * dz + d2 * d2 + d3 * d3
            c = 1.0 + s / (2.0 * z * q0)
            rt = sqrt(c * c - 1.0)
            valv[i] += scale * (c / rt - 1.0)
            if need_grad:
                dgdc = -scale / (rt * rt * rt)
                inv = 1.0 / (z * q0)
                gradv[i, 0] += dgdc * (dz * inv - (c - 1.0) / z)
                gradv[i, 1] += dgdc * d2 * inv
                gradv[i, 2] += dgdc * d3 * inv
    if need_grad:
        return vals, grads
    return vals, None
