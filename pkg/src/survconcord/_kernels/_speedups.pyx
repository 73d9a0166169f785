# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled implementation of the bootstrap hot kernel.

Mirrors ``pyref.batch_core``; the fused loop avoids the (B, M) intermediates
of the numpy path, which pays off for the many small batches of a simulation
study.
"""

import numpy as np

cimport numpy as cnp


def batch_core(object gev_in, object starts_in, object wbg_in, object tgmat_in, double sqrt_n):
    cdef double[:, ::1] gev = np.ascontiguousarray(gev_in, dtype=np.float64)
    cdef cnp.int64_t[::1] starts = np.ascontiguousarray(starts_in, dtype=np.int64)
    cdef double[:, ::1] wbg = np.ascontiguousarray(wbg_in, dtype=np.float64)
    cdef double[:, ::1] tgmat = np.ascontiguousarray(tgmat_in, dtype=np.float64)

    cdef Py_ssize_t n_batch = gev.shape[0]
    cdef Py_ssize_t n_points = starts.shape[0] - 1
    cdef Py_ssize_t n_groups = wbg.shape[1]
    cdef Py_ssize_t n_contrasts = tgmat.shape[1]

    z_arr = np.zeros((n_batch, n_groups), dtype=np.float64)
    den_arr = np.zeros((n_batch, n_contrasts), dtype=np.float64)
    cdef double[:, ::1] z = z_arr
    cdef double[:, ::1] den = den_arr

    cdef Py_ssize_t b, j, k, a, c
    cdef double g1, g2, v

    with nogil:
        for b in range(n_batch):
            for j in range(n_points):
                g1 = 0.0
                g2 = 0.0
                for k in range(starts[j], starts[j + 1]):
                    v = gev[b, k]
                    g1 += v
                    g2 += v * v
                for a in range(n_groups):
                    z[b, a] += g1 * wbg[j, a]
                for c in range(n_contrasts):
                    den[b, c] += g2 * tgmat[j, c]
            for a in range(n_groups):
                z[b, a] *= sqrt_n

    return z_arr, den_arr
