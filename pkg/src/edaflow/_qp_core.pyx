# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled projected coordinate-descent kernel for the non-negative QP solver.

Mirrors `_qp_numpy.cd_sweeps`; selected at import time in `edaflow.qp`.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def cd_sweeps(double[:, ::1] H, double[::1] f, cnp.uint8_t[::1] mask,
              double[::1] x, double tol, int max_sweeps):
    """Run up to max_sweeps cyclic sweeps in place on x; return sweeps used."""
    cdef Py_ssize_t n = f.shape[0]
    cdef Py_ssize_t i, j
    cdef int sweeps = 0
    cdef double hii, xi, d, max_step, max_x, g_i

    g_arr = np.asarray(H) @ np.asarray(x) + np.asarray(f)
    cdef double[::1] g = g_arr

    while sweeps < max_sweeps:
        sweeps += 1
        max_step = 0.0
        for i in range(n):
            hii = H[i, i]
            if hii <= 0.0:
                continue
            xi = x[i] - g[i] / hii
            if mask[i] and xi < 0.0:
                xi = 0.0
            d = xi - x[i]
            if d != 0.0:
                x[i] = xi
                for j in range(n):
                    g[j] += H[i, j] * d
                if d < 0.0:
                    d = -d
                if d > max_step:
                    max_step = d
        max_x = 0.0
        for i in range(n):
            xi = x[i] if x[i] >= 0.0 else -x[i]
            if xi > max_x:
                max_x = xi
        if max_step <= tol * (1.0 + max_x):
            break
    return sweeps
