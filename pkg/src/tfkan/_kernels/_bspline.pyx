# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled evaluation of uniform B-spline bases.

Same contract as ``bspline_py``: for flat samples ``x`` and a uniform knot
vector with ``m = size + 2*order`` intervals, fill a ``[n, m - order]``
array with the degree-``order`` basis values (plus first derivatives on
request).  Each sample only touches its ``order + 1`` active bases, so the
inner loop is O(order^2) per point with no temporaries.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport floor

cnp.import_array()


def basis(const double[::1] x, const double[::1] knots, int order, bint with_derivative):
    cdef Py_ssize_t n = x.shape[0]
    cdef int m = knots.shape[0] - 1       # interval count
    cdef int nbasis = m - order
    cdef int pad = order                  # virtual uniform continuation on each side
    cdef double h = knots[1] - knots[0]
    cdef double t0 = knots[0]
    cdef double tm = knots[m]

    values = np.zeros((n, nbasis), dtype=np.float64)
    derivs = np.zeros((n, nbasis), dtype=np.float64) if with_derivative else None
    cdef double[:, ::1] out = values
    cdef double[:, ::1] dout = out if derivs is None else derivs

    # Padded knots avoid out-of-range reads for spans near the boundary.
    padded = np.empty(m + 1 + 2 * pad, dtype=np.float64)
    padded[pad : pad + m + 1] = np.asarray(knots)
    for p in range(pad):
        padded[pad - 1 - p] = t0 - (p + 1) * h
        padded[pad + m + 1 + p] = tm + (p + 1) * h
    cdef double[::1] t = padded

    scratch = np.empty((4, order + 2), dtype=np.float64)
    cdef double[::1] work = scratch[0]
    cdef double[::1] lower = scratch[1]
    cdef double[::1] left = scratch[2]
    cdef double[::1] right = scratch[3]

    cdef Py_ssize_t i
    cdef int j, d, r, col
    cdef double xv, saved, tmp

    for i in range(n):
        xv = x[i]
        if not (t0 <= xv < tm):
            continue
        j = <int>floor((xv - t0) / h)
        if j < 0:
            j = 0
        elif j > m - 1:
            j = m - 1
        # Float division can land one interval off; fix against the knots.
        while j > 0 and xv < t[pad + j]:
            j -= 1
        while j < m - 1 and xv >= t[pad + j + 1]:
            j += 1

        work[0] = 1.0
        for d in range(1, order + 1):
            left[d] = xv - t[pad + j + 1 - d]
            right[d] = t[pad + j + d] - xv
            if with_derivative and d == order:
                for r in range(d):
                    lower[r] = work[r]
            saved = 0.0
            for r in range(d):
                tmp = work[r] / (right[r + 1] + left[d - r])
                work[r] = saved + right[r + 1] * tmp
                saved = left[d - r] * tmp
            work[d] = saved

        for r in range(order + 1):
            col = j - order + r
            if 0 <= col < nbasis:
                out[i, col] = work[r]

        if with_derivative and order > 0:
            # Uniform spacing collapses the usual knot differences to order*h.
            for r in range(order + 1):
                col = j - order + r
                if col < 0 or col >= nbasis:
                    continue
                tmp = 0.0
                if r > 0:
                    tmp += lower[r - 1]
                if r < order:
                    tmp -= lower[r]
                dout[i, col] = tmp / h

    if with_derivative:
        return values, derivs
    return values
