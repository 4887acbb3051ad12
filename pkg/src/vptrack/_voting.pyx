# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pair-voting kernel for the Gaussian-sphere polar accumulator.

Semantics mirror _voting_py.accumulate_votes exactly.
"""

from libc.math cimport asin, atan2, fabs, floor, sin, sqrt, M_PI

import numpy as np

BACKEND_NAME = "cython"

DEF DEG = 57.29577951308232  # 180 / pi


def accumulate_votes(
    const double[:, ::1] normals,
    const double[::1] lengths,
    const double[::1] orientations,
    const long long[::1] idx_i,
    const long long[::1] idx_j,
    double[:, ::1] grid,
):
    cdef Py_ssize_t m = idx_i.shape[0]
    cdef Py_ssize_t p, a, b
    cdef double ax, ay, az, bx, by, bz
    cdef double vx, vy, vz, nrm, sign
    cdef double dtheta, theta, w, lat_deg, lon_rad
    cdef long lat, lon

    for p in range(m):
        a = <Py_ssize_t> idx_i[p]
        b = <Py_ssize_t> idx_j[p]
        ax = normals[a, 0]; ay = normals[a, 1]; az = normals[a, 2]
        bx = normals[b, 0]; by = normals[b, 1]; bz = normals[b, 2]
        vx = ay * bz - az * by
        vy = az * bx - ax * bz
        vz = ax * by - ay * bx
        nrm = sqrt(vx * vx + vy * vy + vz * vz)
        if nrm <= 1e-9:
            continue
        vx /= nrm; vy /= nrm; vz /= nrm

        if fabs(vz) > 1e-12:
            sign = 1.0 if vz > 0 else -1.0
        elif fabs(vy) > 1e-12:
            sign = 1.0 if vy > 0 else -1.0
        else:
            sign = -1.0 if vx < 0 else 1.0
        vx *= sign; vy *= sign; vz *= sign

        if vz > 1.0:
            vz = 1.0
        lat_deg = asin(vz) * DEG
        lat = <long> floor(lat_deg + 1e-9)
        if lat < 0:
            lat = 0
        elif lat > 89:
            lat = 89
        lon_rad = atan2(vy, vx)
        if lon_rad < 0:
            lon_rad += 2.0 * M_PI
        lon = (<long> floor(lon_rad * DEG + 1e-9)) % 360

        dtheta = fabs(orientations[a] - orientations[b])
        theta = dtheta if dtheta < M_PI - dtheta else M_PI - dtheta
        w = lengths[a] * lengths[b] * sin(2.0 * theta)
        if w <= 0.0:
            continue
        grid[lat, lon] += w
