# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: trilinear grid lookup and volumetric compositing,
forward and backward.  Contracts match ``_ref.py`` exactly."""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, floor

BACKEND = "compiled"


def trilinear_forward(double[:, :, :, ::1] values, double[:, ::1] points,
                      double[::1] lo, double[::1] h):
    cdef Py_ssize_t m = points.shape[0]
    cdef Py_ssize_t nx = values.shape[0], ny = values.shape[1]
    cdef Py_ssize_t nz = values.shape[2], c = values.shape[3]
    out_arr = np.zeros((m, c))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t p, k, dx, dy, dz, ix, iy, iz
    cdef double ux, uy, uz, fx, fy, fz, w, wx, wy, wz
    cdef bint inside
    for p in range(m):
        inside = (points[p, 0] >= lo[0] and points[p, 0] <= lo[0] + nx * h[0] and
                  points[p, 1] >= lo[1] and points[p, 1] <= lo[1] + ny * h[1] and
                  points[p, 2] >= lo[2] and points[p, 2] <= lo[2] + nz * h[2])
        if not inside:
            continue
        ux = (points[p, 0] - lo[0]) / h[0] - 0.5
        uy = (points[p, 1] - lo[1]) / h[1] - 0.5
        uz = (points[p, 2] - lo[2]) / h[2] - 0.5
        ix = <Py_ssize_t>floor(ux); iy = <Py_ssize_t>floor(uy); iz = <Py_ssize_t>floor(uz)
        if ix < 0: ix = 0
        if ix > nx - 2: ix = nx - 2
        if iy < 0: iy = 0
        if iy > ny - 2: iy = ny - 2
        if iz < 0: iz = 0
        if iz > nz - 2: iz = nz - 2
        fx = ux - ix; fy = uy - iy; fz = uz - iz
        if fx < 0: fx = 0
        if fx > 1: fx = 1
        if fy < 0: fy = 0
        if fy > 1: fy = 1
        if fz < 0: fz = 0
        if fz > 1: fz = 1
        for dx in range(2):
            wx = fx if dx else 1.0 - fx
            for dy in range(2):
                wy = fy if dy else 1.0 - fy
                for dz in range(2):
                    wz = fz if dz else 1.0 - fz
                    w = wx * wy * wz
                    for k in range(c):
                        out[p, k] += w * values[ix + dx, iy + dy, iz + dz, k]
    return out_arr


def trilinear_backward(double[:, :, :, ::1] values, double[:, ::1] points,
                       double[::1] lo, double[::1] h, double[:, ::1] gout):
    cdef Py_ssize_t m = points.shape[0]
    cdef Py_ssize_t nx = values.shape[0], ny = values.shape[1]
    cdef Py_ssize_t nz = values.shape[2], c = values.shape[3]
    gvalues_arr = np.zeros((nx, ny, nz, c))
    gpoints_arr = np.zeros((m, 3))
    cdef double[:, :, :, ::1] gvalues = gvalues_arr
    cdef double[:, ::1] gpoints = gpoints_arr
    cdef Py_ssize_t p, k, dx, dy, dz, ix, iy, iz
    cdef double ux, uy, uz, fx, fy, fz, w, wx, wy, wz, gdotv, sx, sy, sz
    cdef double ax, ay, az
    cdef bint inside
    for p in range(m):
        inside = (points[p, 0] >= lo[0] and points[p, 0] <= lo[0] + nx * h[0] and
                  points[p, 1] >= lo[1] and points[p, 1] <= lo[1] + ny * h[1] and
                  points[p, 2] >= lo[2] and points[p, 2] <= lo[2] + nz * h[2])
        if not inside:
            continue
        ux = (points[p, 0] - lo[0]) / h[0] - 0.5
        uy = (points[p, 1] - lo[1]) / h[1] - 0.5
        uz = (points[p, 2] - lo[2]) / h[2] - 0.5
        ix = <Py_ssize_t>floor(ux); iy = <Py_ssize_t>floor(uy); iz = <Py_ssize_t>floor(uz)
        if ix < 0: ix = 0
        if ix > nx - 2: ix = nx - 2
        if iy < 0: iy = 0
        if iy > ny - 2: iy = ny - 2
        if iz < 0: iz = 0
        if iz > nz - 2: iz = nz - 2
        fx = ux - ix; fy = uy - iy; fz = uz - iz
        ax = 1.0 if (fx > 0 and fx < 1) else 0.0
        ay = 1.0 if (fy > 0 and fy < 1) else 0.0
        az = 1.0 if (fz > 0 and fz < 1) else 0.0
        if fx < 0: fx = 0
        if fx > 1: fx = 1
        if fy < 0: fy = 0
        if fy > 1: fy = 1
        if fz < 0: fz = 0
        if fz > 1: fz = 1
        for dx in range(2):
            wx = fx if dx else 1.0 - fx
            sx = 1.0 if dx else -1.0
            for dy in range(2):
                wy = fy if dy else 1.0 - fy
                sy = 1.0 if dy else -1.0
                for dz in range(2):
                    wz = fz if dz else 1.0 - fz
                    sz = 1.0 if dz else -1.0
                    w = wx * wy * wz
                    gdotv = 0.0
                    for k in range(c):
                        gvalues[ix + dx, iy + dy, iz + dz, k] += w * gout[p, k]
                        gdotv += gout[p, k] * values[ix + dx, iy + dy, iz + dz, k]
                    gpoints[p, 0] += sx * wy * wz * ax / h[0] * gdotv
                    gpoints[p, 1] += sy * wx * wz * ay / h[1] * gdotv
                    gpoints[p, 2] += sz * wx * wy * az / h[2] * gdotv
    return gvalues_arr, gpoints_arr


def composite_forward(double[:, ::1] sigma, double[:, ::1] delta,
                      double[:, :, ::1] color):
    cdef Py_ssize_t r = sigma.shape[0], n = sigma.shape[1]
    out_arr = np.zeros((r, 3))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j, k
    cdef double t, ae, w
    for i in range(r):
        t = 1.0
        for j in range(n):
            ae = exp(-sigma[i, j] * delta[i, j])
            w = t * (1.0 - ae)
            for k in range(3):
                out[i, k] += w * color[i, j, k]
            t *= ae
    return out_arr


def composite_backward(double[:, ::1] sigma, double[:, ::1] delta,
                       double[:, :, ::1] color, double[:, ::1] gout):
    cdef Py_ssize_t r = sigma.shape[0], n = sigma.shape[1]
    gsigma_arr = np.zeros((r, n))
    gdelta_arr = np.zeros((r, n))
    gcolor_arr = np.zeros((r, n, 3))
    t_arr = np.empty(n)
    cg_arr = np.empty(n)
    cdef double[:, ::1] gsigma = gsigma_arr
    cdef double[:, ::1] gdelta = gdelta_arr
    cdef double[:, :, ::1] gcolor = gcolor_arr
    cdef double[::1] tbuf = t_arr
    cdef double[::1] cgbuf = cg_arr
    cdef Py_ssize_t i, j, k
    cdef double t, ae, w, suffix, ga, cg
    for i in range(r):
        t = 1.0
        for j in range(n):
            tbuf[j] = t
            ae = exp(-sigma[i, j] * delta[i, j])
            w = t * (1.0 - ae)
            cg = 0.0
            for k in range(3):
                gcolor[i, j, k] = w * gout[i, k]
                cg += color[i, j, k] * gout[i, k]
            cgbuf[j] = cg
            t *= ae
        suffix = 0.0
        for j in range(n - 1, -1, -1):
            ae = exp(-sigma[i, j] * delta[i, j])
            ga = tbuf[j] * ae * cgbuf[j] - suffix
            gsigma[i, j] = ga * delta[i, j]
            gdelta[i, j] = ga * sigma[i, j]
            suffix += tbuf[j] * (1.0 - ae) * cgbuf[j]
    return gsigma_arr, gdelta_arr, gcolor_arr
