# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernel implementations (native backend).

Single fused pass over the data per call: linear term, stable log-loss,
and gradient accumulation without intermediate arrays.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs, log1p

cnp.import_array()

BACKEND = "native"


def logistic_loss_grad(X, y, w, double intercept, double l2, sample_weight=None):
    """Weighted mean logistic loss and gradient; see kernels.__init__."""
    cdef cnp.ndarray[cnp.float64_t, ndim=2, mode="c"] Xc = \
        np.ascontiguousarray(X, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] yc = \
        np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] wc = \
        np.ascontiguousarray(w, dtype=np.float64)

    cdef Py_ssize_t n = Xc.shape[0]
    cdef Py_ssize_t d = Xc.shape[1]
    cdef cnp.ndarray[cnp.float64_t, ndim=1] grad = np.zeros(d + 1, dtype=np.float64)

    cdef double[:, ::1] Xv = Xc
    cdef double[::1] yv = yc
    cdef double[::1] wv = wc
    cdef double[::1] gv = grad

    cdef bint weighted = sample_weight is not None
    cdef cnp.ndarray[cnp.float64_t, ndim=1] swc
    cdef double[::1] swv
    if weighted:
        swc = np.ascontiguousarray(sample_weight, dtype=np.float64)
        swv = swc

    cdef double loss = 0.0, total = 0.0, z, p, r, sw, yi
    cdef Py_ssize_t i, j
    for i in range(n):
        z = intercept
        for j in range(d):
            z += Xv[i, j] * wv[j]
        yi = yv[i]
        sw = swv[i] if weighted else 1.0
        if z >= 0.0:
            loss += sw * (z - yi * z + log1p(exp(-z)))
            p = 1.0 / (1.0 + exp(-z))
        else:
            loss += sw * (-yi * z + log1p(exp(z)))
            p = exp(z) / (1.0 + exp(z))
        r = sw * (p - yi)
        for j in range(d):
            gv[j] += r * Xv[i, j]
        gv[d] += r
        total += sw

    cdef double penalty = 0.0
    for j in range(d):
        gv[j] /= total
        gv[j] += l2 * wv[j]
        penalty += wv[j] * wv[j]
    gv[d] /= total

    return loss / total + 0.5 * l2 * penalty, grad
