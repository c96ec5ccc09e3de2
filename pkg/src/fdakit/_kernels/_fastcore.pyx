# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-pixel kernels. Must stay bit-identical to ``pure.py``:
same expressions, same operation order, no reassociation."""

import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor

cnp.import_array()

BACKEND = "fastcore"


def select_swap(cnp.ndarray source, cnp.ndarray target, cnp.ndarray mask):
    cdef double[:, ::1] s = np.ascontiguousarray(source, dtype=np.float64)
    cdef double[:, ::1] t = np.ascontiguousarray(target, dtype=np.float64)
    cdef cnp.uint8_t[:, ::1] m = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef Py_ssize_t h = s.shape[0], w = s.shape[1]
    out_arr = np.empty((h, w), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    for i in range(h):
        for j in range(w):
            out[i, j] = t[i, j] if m[i, j] else s[i, j]
    return out_arr


def fog_blend(cnp.ndarray image, cnp.ndarray transmission, double airlight):
    cdef double[:, :, ::1] img = np.ascontiguousarray(image, dtype=np.float64)
    cdef double[:, ::1] tr = np.ascontiguousarray(transmission, dtype=np.float64)
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1], c = img.shape[2]
    out_arr = np.empty((h, w, c), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double t
    for i in range(h):
        for j in range(w):
            t = tr[i, j]
            for k in range(c):
                out[i, j, k] = img[i, j, k] * t + airlight * (1.0 - t)
    return out_arr


def blend_capsule(cnp.ndarray image, double ax, double ay, double bx, double by,
                  double radius, cnp.ndarray color, double alpha):
    cdef double[:, :, ::1] img = image
    cdef double[::1] col = np.ascontiguousarray(color, dtype=np.float64)
    cdef Py_ssize_t h = img.shape[0], w = img.shape[1], nc = img.shape[2]
    cdef Py_ssize_t x0, x1, y0, y1, x, y, k
    cdef double vx, vy, vv, px, py, t, dx, dy, r2

    x0 = max(<Py_ssize_t> 0, <Py_ssize_t> floor(min(ax, bx) - radius))
    x1 = min(w - 1, <Py_ssize_t> ceil(max(ax, bx) + radius))
    y0 = max(<Py_ssize_t> 0, <Py_ssize_t> floor(min(ay, by) - radius))
    y1 = min(h - 1, <Py_ssize_t> ceil(max(ay, by) + radius))
    if x0 > x1 or y0 > y1:
        return

    vx = bx - ax
    vy = by - ay
    vv = vx * vx + vy * vy
    r2 = radius * radius
    for y in range(y0, y1 + 1):
        py = y - ay
        for x in range(x0, x1 + 1):
            px = x - ax
            if vv > 0.0:
                t = (px * vx + py * vy) / vv
                if t < 0.0:
                    t = 0.0
                elif t > 1.0:
                    t = 1.0
            else:
                t = 0.0
            dx = px - t * vx
            dy = py - t * vy
            if dx * dx + dy * dy <= r2:
                for k in range(nc):
                    img[y, x, k] = img[y, x, k] * (1.0 - alpha) + col[k] * alpha
