"""Rotation-conditioned linear translation refinement.

With the absolute rotation known, the pinhole reprojection constraint
becomes linear in the translation: each observed point contributes the
row pair

    [-1  0  (u - cx) / fx] t = (RX)_1 - (RX)_3 (u - cx) / fx
    [ 0 -1  (v - cy) / fy] t = (RX)_2 - (RX)_3 (v - cy) / fy

The stacked system is solved through its normal equations, wrapped in a
RANSAC loop that scores candidates by true pixel reprojection error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InsufficientPointsError, NoConsensusError, RankDeficientError
from .geometry import CameraIntrinsics, _freeze

_MAX_CONDITION = 1e12


@dataclass(frozen=True)
class PointCorrespondence:
    """A world point in meters and its observed pixel."""

    X: np.ndarray
    x: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "X", _freeze(np.reshape(self.X, 3)))
        object.__setattr__(self, "x", _freeze(np.reshape(self.x, 2)))


@dataclass(frozen=True)
class TranslationSystem:
    """Stacked linear system; rows come in pairs, one pair per point."""

    A: np.ndarray  # (2n, 3)
    b: np.ndarray  # (2n,)
    row_map: np.ndarray  # (n,) correspondence index per row pair

    def __post_init__(self):
        object.__setattr__(self, "A", _freeze(self.A))
        object.__setattr__(self, "b", _freeze(self.b))
        object.__setattr__(self, "row_map", np.asarray(self.row_map, dtype=int))


@dataclass(frozen=True)
class RansacConfig:
    iterations: int = 200
    seed: int = 0
    inlier_threshold_px: float = 2.0
    min_inliers: int = 4


def _system_arrays(
    X: np.ndarray, pix: np.ndarray, R: np.ndarray, intrinsics: CameraIntrinsics
) -> tuple[np.ndarray, np.ndarray]:
    """(2n, 3) coefficient matrix and (2n,) right-hand side, interleaved."""
    RX = X @ np.asarray(R, dtype=float).T
    a = (pix[:, 0] - intrinsics.cx) / intrinsics.fx
    c = (pix[:, 1] - intrinsics.cy) / intrinsics.fy
    n = len(X)
    A = np.zeros((2 * n, 3))
    A[0::2, 0] = -1.0
    A[0::2, 2] = a
    A[1::2, 1] = -1.0
    A[1::2, 2] = c
    b = np.empty(2 * n)
    b[0::2] = RX[:, 0] - RX[:, 2] * a
    b[1::2] = RX[:, 1] - RX[:, 2] * c
    return A, b


def build_translation_system(
    corrs: list[PointCorrespondence], R: np.ndarray, intrinsics: CameraIntrinsics
) -> TranslationSystem:
    """Assemble the linear system for a set of correspondences.

    At the true translation, A t - b equals the reprojection error scaled
    by depth over focal length, so noise-free data satisfies A t = b
    exactly.
    """
    if len(corrs) < 2:
        raise InsufficientPointsError(
            f"need at least 2 correspondences (4 equations), got {len(corrs)}"
        )
    X = np.array([c.X for c in corrs])
    pix = np.array([c.x for c in corrs])
    A, b = _system_arrays(X, pix, R, intrinsics)
    return TranslationSystem(A=A, b=b, row_map=np.arange(len(corrs)))


def solve_normal_equations(system: TranslationSystem) -> np.ndarray:
    """Least-squares translation through A^T A t = A^T b."""
    AtA = system.A.T @ system.A
    cond = np.linalg.cond(AtA)
    if not np.isfinite(cond) or cond >= _MAX_CONDITION:
        raise RankDeficientError(
            f"normal equations are rank deficient (condition {cond:.3g})"
        )
    return np.linalg.solve(AtA, system.A.T @ system.b)


def _solve3_batch(AtA: np.ndarray, Atb: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Cramer solve of a (k, 3, 3) batch; singular systems are flagged out."""
    a, b, c = AtA[:, 0, 0], AtA[:, 0, 1], AtA[:, 0, 2]
    d, e, f = AtA[:, 1, 0], AtA[:, 1, 1], AtA[:, 1, 2]
    g, h, i = AtA[:, 2, 0], AtA[:, 2, 1], AtA[:, 2, 2]
    det = a * (e * i - f * h) - b * (d * i - f * g) + c * (d * h - e * g)
    ok = np.abs(det) > 1e-12
    safe = np.where(ok, det, 1.0)
    inv = np.empty_like(AtA)
    inv[:, 0, 0] = e * i - f * h
    inv[:, 0, 1] = c * h - b * i
    inv[:, 0, 2] = b * f - c * e
    inv[:, 1, 0] = f * g - d * i
    inv[:, 1, 1] = a * i - c * g
    inv[:, 1, 2] = c * d - a * f
    inv[:, 2, 0] = d * h - e * g
    inv[:, 2, 1] = b * g - a * h
    inv[:, 2, 2] = a * e - b * d
    t = np.einsum("kij,kj->ki", inv, Atb) / safe[:, None]
    return t, ok


def ransac_translation(
    corrs: list[PointCorrespondence],
    R: np.ndarray,
    intrinsics: CameraIntrinsics,
    config: RansacConfig | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Consensus translation estimate robust to outlier correspondences.

    Each iteration solves the minimal 2-point (4 x 3) system and counts
    correspondences whose true reprojection error under the candidate is
    within the pixel threshold (points behind the camera count as
    outliers). The final translation re-solves the normal equations over
    the best consensus set. Deterministic for a fixed seed; iteration k
    uses the k-th row of a sample table drawn up front, so evaluation
    order cannot change the result.
    """
    config = config or RansacConfig()
    n = len(corrs)
    if n < 2:
        raise InsufficientPointsError(f"need at least 2 correspondences, got {n}")
    X = np.array([c.X for c in corrs])
    pix = np.array([c.x for c in corrs])
    A, b = _system_arrays(X, pix, R, intrinsics)
    RX = X @ np.asarray(R, dtype=float).T

    rng = np.random.default_rng(config.seed)
    i1 = rng.integers(0, n, size=config.iterations)
    i2 = rng.integers(0, n - 1, size=config.iterations)
    i2 = i2 + (i2 >= i1)

    rows = np.stack([2 * i1, 2 * i1 + 1, 2 * i2, 2 * i2 + 1], axis=1)
    A4 = A[rows]  # (iters, 4, 3)
    b4 = b[rows]  # (iters, 4)
    AtA = np.einsum("kri,krj->kij", A4, A4)
    Atb = np.einsum("kri,kr->ki", A4, b4)
    t_cand, solvable = _solve3_batch(AtA, Atb)

    # reprojection error of every point under every candidate
    z = RX[None, :, 2] + t_cand[:, None, 2]
    in_front = z > 1e-9
    z = np.where(in_front, z, np.nan)
    du = intrinsics.fx * (RX[None, :, 0] + t_cand[:, None, 0]) / z + intrinsics.cx - pix[None, :, 0]
    dv = intrinsics.fy * (RX[None, :, 1] + t_cand[:, None, 1]) / z + intrinsics.cy - pix[None, :, 1]
    err2 = du * du + dv * dv
    inlier = in_front & (err2 <= config.inlier_threshold_px**2)
    counts = np.where(solvable, inlier.sum(axis=1), -1)

    best = int(np.argmax(counts))  # ties: first candidate found
    if counts[best] < config.min_inliers:
        raise NoConsensusError(
            f"best consensus has {max(counts[best], 0)} inliers, "
            f"need {config.min_inliers}"
        )
    mask = inlier[best]
    idx = np.flatnonzero(mask)
    row_idx = np.stack([2 * idx, 2 * idx + 1], axis=1).ravel()
    final = TranslationSystem(A=A[row_idx], b=b[row_idx], row_map=idx)
    return solve_normal_equations(final), mask
