"""Manhattan-frame construction and absolute rotation optimization.

Per-cluster dominant directions are the null directions of the stacked
great-circle normals (smallest right-singular vector). The first frame
with enough clustered lines freezes those directions as the reference
Manhattan frame; later frames are aligned to it by minimizing the sum of
angles between observed vanishing directions and the rotated reference
directions with Levenberg-Marquardt on SO(3).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateClusterError,
    InsufficientLinesError,
    NoMatchError,
    NotFrameLikeError,
    UnderconstrainedError,
)
from .geometry import canonical_hemisphere, exp_so3, is_rotation, log_so3, nearest_rotation, skew


@dataclass(frozen=True)
class ManhattanFrame:
    """Reference dominant directions as the columns of a rotation matrix."""

    d: np.ndarray  # (3, 3), columns are the dominant directions
    established_at: int | None = None

    def __post_init__(self):
        d = np.asarray(self.d, dtype=float)
        if not is_rotation(d, tol=1e-9):
            raise ValueError("dominant directions must form a rotation matrix")
        object.__setattr__(self, "d", d)

    def column(self, k: int) -> np.ndarray:
        return self.d[:, k]


@dataclass(frozen=True)
class RotationProblem:
    """Matched (observed direction, reference direction) pairs plus the init."""

    deltas: np.ndarray  # (m, 3) observed vanishing directions, sign-corrected
    dirs: np.ndarray  # (m, 3) matched reference directions
    R_init: np.ndarray
    weights: np.ndarray  # (m,) per-axis confidence, e.g. cluster line counts

    def __post_init__(self):
        deltas = np.asarray(self.deltas, dtype=float).reshape(-1, 3)
        dirs = np.asarray(self.dirs, dtype=float).reshape(-1, 3)
        if len(deltas) != len(dirs) or len(deltas) < 1:
            raise ValueError("need equal, non-empty delta/direction lists")
        for name, arr in (("deltas", deltas), ("dirs", dirs)):
            if not np.allclose(np.linalg.norm(arr, axis=1), 1.0, atol=1e-6):
                raise ValueError(f"{name} must be unit vectors")
        object.__setattr__(self, "deltas", deltas)
        object.__setattr__(self, "dirs", dirs)
        object.__setattr__(self, "R_init", np.asarray(self.R_init, dtype=float))
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float).reshape(-1))

    @property
    def size(self) -> int:
        return len(self.deltas)


@dataclass(frozen=True)
class LMConfig:
    """Levenberg-Marquardt schedule for the rotation refinement."""

    lambda0: float = 1e-3
    lambda_factor: float = 10.0
    max_iterations: int = 20
    cost_tolerance: float = 1e-10
    step_tolerance: float = 1e-10
    use_weights: bool = False


@dataclass(frozen=True)
class RotationResult:
    rotation: np.ndarray
    cost: float
    initial_cost: float
    iterations: int


def dominant_direction(cluster_normals: np.ndarray) -> tuple[np.ndarray, float]:
    """Null direction of a cluster of great-circle normals.

    Solves the homogeneous least-squares system (every normal perpendicular
    to the sought direction) by SVD of the stacked normals. Returns the
    direction (canonical hemisphere) and the residual max |s . d|.
    """
    S = np.asarray(cluster_normals, dtype=float).reshape(-1, 3)
    if len(S) < 2:
        raise InsufficientLinesError(f"need at least 2 normals, got {len(S)}")
    _, sv, Vt = np.linalg.svd(S)
    sv = np.concatenate([sv, np.zeros(3 - len(sv))]) if len(sv) < 3 else sv
    if sv[1] - sv[2] < 1e-6:
        raise DegenerateClusterError(
            f"normals do not span a plane (singular values {sv[1]:.2e}, {sv[2]:.2e})"
        )
    d = canonical_hemisphere(Vt[2])
    return d, float(np.max(np.abs(S @ d)))


def orthonormalize_frame(
    d1: np.ndarray, d2: np.ndarray, d3: np.ndarray, established_at: int | None = None
) -> ManhattanFrame:
    """Nearest rotation matrix to the column stack of three near-orthogonal axes.

    The sign of a dominant direction is arbitrary, so a left-handed input
    has its last column flipped before the polar decomposition: correcting
    the determinant inside the decomposition instead would reflect across
    an arbitrary direction once the singular values degenerate, skewing
    every axis.
    """
    M = np.column_stack([d1, d2, d3]).astype(float)
    gram = np.abs(M.T @ M - np.diag(np.diag(M.T @ M)))
    if np.max(gram) >= 0.2:
        raise NotFrameLikeError(
            f"directions are too far from orthogonal (max |dot| {np.max(gram):.3f})"
        )
    if np.linalg.det(M) < 0:
        M[:, 2] = -M[:, 2]
    U, _, Vt = np.linalg.svd(M)
    Q = U @ Vt
    if np.linalg.det(Q) < 0:  # unreachable past the orthogonality gate; keep safe
        U[:, 2] = -U[:, 2]
        Q = U @ Vt
    return ManhattanFrame(d=Q, established_at=established_at)


def frame_from_directions(
    dirs: list[np.ndarray], established_at: int | None = None
) -> ManhattanFrame:
    """Orthonormal frame from 2 or 3 near-orthogonal unit directions.

    With only two directions the third is completed by the cross product
    before orthonormalization.
    """
    dirs = [np.asarray(d, dtype=float) for d in dirs]
    if len(dirs) < 2:
        raise InsufficientLinesError("need at least 2 directions to build a frame")
    if len(dirs) == 2:
        third = np.cross(dirs[0], dirs[1])
        dirs.append(canonical_hemisphere(third / np.linalg.norm(third)))
    return orthonormalize_frame(*dirs[:3], established_at=established_at)


def frame_from_clusters(
    clusters: list[np.ndarray], established_at: int | None = None
) -> ManhattanFrame:
    """Build the reference frame from 2 or 3 clusters of great-circle normals."""
    if len(clusters) < 2:
        raise InsufficientLinesError("need at least 2 clusters to anchor a frame")
    return frame_from_directions(
        [dominant_direction(c)[0] for c in clusters[:3]], established_at
    )


def match_vps_to_frame(
    deltas: np.ndarray,
    frame: ManhattanFrame,
    R_init: np.ndarray,
    weights: np.ndarray | None = None,
) -> RotationProblem:
    """Greedily associate observed directions with rotated frame columns.

    Repeatedly picks the largest |dot| entry of the association table,
    removing its row and column. Matched observations are sign-flipped to
    agree with the rotated reference; axes whose best |dot| falls below
    cos(20 degrees) are dropped.
    """
    deltas = np.asarray(deltas, dtype=float).reshape(-1, 3)
    if weights is None:
        weights = np.ones(len(deltas))
    weights = np.asarray(weights, dtype=float).reshape(-1)
    rotated = (np.asarray(R_init, dtype=float) @ frame.d).T  # rows: rotated d_k
    table = np.abs(deltas @ rotated.T)  # (m_obs, 3)

    gate = math.cos(math.radians(20.0))
    matched_deltas, matched_dirs, matched_weights = [], [], []
    work = table.copy()
    for _ in range(min(len(deltas), 3)):
        i, j = np.unravel_index(int(np.argmax(work)), work.shape)
        if work[i, j] < gate:
            break
        sign = 1.0 if float(deltas[i] @ rotated[j]) > 0 else -1.0
        matched_deltas.append(sign * deltas[i])
        matched_dirs.append(frame.column(j))
        matched_weights.append(weights[i])
        work[i, :] = -1.0
        work[:, j] = -1.0
    if not matched_deltas:
        raise NoMatchError("no observed direction within 20 degrees of the frame")
    return RotationProblem(
        deltas=np.array(matched_deltas),
        dirs=np.array(matched_dirs),
        R_init=np.asarray(R_init, dtype=float),
        weights=np.array(matched_weights),
    )


def _cost_terms(R: np.ndarray, problem: RotationProblem) -> np.ndarray:
    dots = np.einsum("ij,ij->i", problem.deltas, problem.dirs @ R.T)
    return np.arccos(np.clip(dots, -1.0, 1.0))


def _cost(R: np.ndarray, problem: RotationProblem) -> float:
    return float(np.sum(_cost_terms(R, problem)))


def _jacobian_rows(R: np.ndarray, problem: RotationProblem) -> np.ndarray:
    """Rows d(arccos(delta . R d))/d(epsilon) for R <- exp([eps]x) R.

    Axes saturated at |dot| >= 1 - 1e-12 get a zero row: the angle residual
    is already (numerically) at an extremum and arccos has no finite slope.
    """
    rd = problem.dirs @ R.T  # (m, 3) rotated reference directions
    dots = np.einsum("ij,ij->i", problem.deltas, rd)
    rows = np.zeros((problem.size, 3))
    for k in range(problem.size):
        c = dots[k]
        if abs(c) >= 1.0 - 1e-12:
            continue
        rows[k] = (problem.deltas[k] @ skew(rd[k])) / math.sqrt(1.0 - c * c)
    return rows


def rotation_cost(omega: np.ndarray, problem: RotationProblem) -> float:
    """Sum of angles between observed and rotated reference directions."""
    return _cost(exp_so3(omega), problem)


def rotation_jacobian(omega: np.ndarray, problem: RotationProblem) -> np.ndarray:
    """Per-axis Jacobian rows of the angle residuals at R = exp(omega).

    The rows differentiate with respect to a left-multiplied axis-angle
    increment, matching the update used by optimize_rotation.
    """
    return _jacobian_rows(exp_so3(omega), problem)


def optimize_rotation(
    problem: RotationProblem, config: LMConfig | None = None
) -> RotationResult:
    """Levenberg-Marquardt refinement of the absolute rotation.

    Steps solve (J^T J + lambda I) dw = -J^T r on the angle residuals and
    apply R <- exp(dw) R; a step is accepted only if the summed angle cost
    decreases, so the returned cost never exceeds the initial one.
    """
    config = config or LMConfig()
    if problem.size < 2:
        raise UnderconstrainedError(
            f"{problem.size} matched axis leaves the rotation underdetermined"
        )
    w = problem.weights / np.mean(problem.weights) if config.use_weights else None

    R = problem.R_init.copy()
    cost = _cost(R, problem)
    initial_cost = cost
    lam = config.lambda0
    iterations = 0
    for _ in range(config.max_iterations):
        iterations += 1
        r = _cost_terms(R, problem)
        J = _jacobian_rows(R, problem)
        if w is not None:
            r = r * w
            J = J * w[:, None]
        g = J.T @ r
        H = J.T @ J
        try:
            step = np.linalg.solve(H + lam * np.eye(3), -g)
        except np.linalg.LinAlgError:
            break
        if np.linalg.norm(step) < config.step_tolerance:
            break
        R_try = exp_so3(step) @ R
        cost_try = _cost(R_try, problem)
        if cost_try < cost:
            improved = cost - cost_try
            R = R_try
            cost = cost_try
            lam /= config.lambda_factor
            if improved < config.cost_tolerance:
                break
        else:
            lam *= config.lambda_factor
    R = nearest_rotation(R)  # shed accumulated floating-point drift
    cost = _cost(R, problem)
    if cost > initial_cost:  # renormalization jitter must never worsen the result
        R, cost = problem.R_init.copy(), initial_cost
    return RotationResult(
        rotation=R, cost=cost, initial_cost=initial_cost, iterations=iterations
    )
