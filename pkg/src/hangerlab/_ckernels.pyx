# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled geometry kernels.

Arithmetic mirrors :mod:`hangerlab._kernels_py` operation for operation so
both backends return identical grids.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def points_in_polygon(const double[::1] px, const double[::1] py, const double[:, ::1] poly):
    cdef Py_ssize_t n = px.shape[0]
    cdef Py_ssize_t m = poly.shape[0]
    out_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] out = out_arr
    cdef Py_ssize_t k, i, j
    cdef double x, y, xi, yi, xj, yj
    cdef unsigned char inside
    for k in range(n):
        x = px[k]
        y = py[k]
        inside = 0
        j = m - 1
        for i in range(m):
            xi = poly[i, 0]
            yi = poly[i, 1]
            xj = poly[j, 0]
            yj = poly[j, 1]
            if (yi > y) != (yj > y):
                if x < (xj - xi) * (y - yi) / (yj - yi) + xi:
                    inside ^= 1
            j = i
        out[k] = inside
    return out_arr


def points_near_segments(const double[::1] px, const double[::1] py, const double[:, ::1] segs, double radius):
    cdef Py_ssize_t n = px.shape[0]
    cdef Py_ssize_t m = segs.shape[0]
    out_arr = np.zeros(n, dtype=np.uint8)
    cdef unsigned char[::1] out = out_arr
    cdef Py_ssize_t k, s
    cdef double x, y, x1, y1, dx, dy, l2, t, cx, cy, ex, ey
    cdef double r2 = radius * radius
    for k in range(n):
        x = px[k]
        y = py[k]
        for s in range(m):
            x1 = segs[s, 0]
            y1 = segs[s, 1]
            dx = segs[s, 2] - x1
            dy = segs[s, 3] - y1
            l2 = dx * dx + dy * dy
            if l2 > 0.0:
                t = ((x - x1) * dx + (y - y1) * dy) / l2
            else:
                t = 0.0
            if t < 0.0:
                t = 0.0
            elif t > 1.0:
                t = 1.0
            cx = x1 + t * dx
            cy = y1 + t * dy
            ex = x - cx
            ey = y - cy
            if ex * ex + ey * ey <= r2:
                out[k] = 1
                break
    return out_arr
