"""Pure-numpy implementation of the pair-voting kernel.

Must stay semantically identical to the compiled kernel in _voting.pyx:
same skip criteria, same canonicalization ties, same cell formula.
"""

import numpy as np

BACKEND_NAME = "numpy"

_DEG = 180.0 / np.pi


def accumulate_votes(normals, lengths, orientations, idx_i, idx_j, grid):
    """Add one vote per line pair into the 90x360 polar accumulator.

    normals: (n, 3) unit great-circle normals
    lengths: (n,) segment lengths in pixels
    orientations: (n,) image-plane direction angles folded into [0, pi)
    idx_i, idx_j: (m,) pair index arrays
    grid: (90, 360) accumulator, modified in place
    """
    s1 = normals[idx_i]
    s2 = normals[idx_j]
    v = np.cross(s1, s2)
    nrm = np.linalg.norm(v, axis=1)
    ok = nrm > 1e-9
    if not np.any(ok):
        return
    v = v[ok] / nrm[ok, None]

    # hemisphere canonicalization: sign of z, then y, then x
    x, y, z = v[:, 0], v[:, 1], v[:, 2]
    sign = np.where(
        np.abs(z) > 1e-12,
        np.sign(z),
        np.where(np.abs(y) > 1e-12, np.sign(y), np.where(x < 0, -1.0, 1.0)),
    )
    v = v * sign[:, None]

    lat = np.floor(np.arcsin(np.clip(v[:, 2], -1.0, 1.0)) * _DEG + 1e-9).astype(np.int64)
    np.clip(lat, 0, 89, out=lat)
    lon_rad = np.arctan2(v[:, 1], v[:, 0])
    lon_rad = np.where(lon_rad < 0, lon_rad + 2.0 * np.pi, lon_rad)
    lon = np.floor(lon_rad * _DEG + 1e-9).astype(np.int64) % 360

    dtheta = np.abs(orientations[idx_i[ok]] - orientations[idx_j[ok]])
    theta = np.minimum(dtheta, np.pi - dtheta)
    w = lengths[idx_i[ok]] * lengths[idx_j[ok]] * np.sin(2.0 * theta)
    w = np.maximum(w, 0.0)

    flat = np.bincount(lat * 360 + lon, weights=w, minlength=90 * 360)
    grid += flat.reshape(90, 360)
