"""Camera model, homogeneous line algebra, and SO(3) primitives.

Conventions used throughout the package:

* A pose ``(R, t)`` maps world coordinates to camera coordinates,
  ``X_cam = R @ X_world + t``.  The camera looks down +z, x is right,
  y is down.
* All angles are radians; degrees appear only at CLI boundaries.
* Homogeneous lines and sphere directions are sign-canonicalized so that
  equality assertions are deterministic (the underlying objects are only
  defined up to sign).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import BehindCameraError, DegenerateSegmentError

_SIGN_EPS = 1e-12


def canonical_sign(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` so its first component with magnitude > 1e-12 is positive."""
    for x in v:
        if abs(x) > _SIGN_EPS:
            return v if x > 0 else -v
    return v


def canonical_hemisphere(v: np.ndarray) -> np.ndarray:
    """Flip ``v`` into the z >= 0 hemisphere.

    Ties (|z| < 1e-12) are resolved by requiring y >= 0, then x >= 0, so
    every direction has exactly one canonical representative.
    """
    if abs(v[2]) > _SIGN_EPS:
        return v if v[2] > 0 else -v
    if abs(v[1]) > _SIGN_EPS:
        return v if v[1] > 0 else -v
    return v if v[0] >= 0 else -v


def _unit(v: np.ndarray) -> np.ndarray:
    return v / np.linalg.norm(v)


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole parameters in pixels; ``width``/``height`` are optional bounds."""

    fx: float
    fy: float
    cx: float
    cy: float
    width: int | None = None
    height: int | None = None

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise ValueError(f"focal lengths must be positive, got fx={self.fx} fy={self.fy}")
        if self.width is not None and not (0 <= self.cx < self.width):
            raise ValueError(f"principal point x={self.cx} outside image width {self.width}")
        if self.height is not None and not (0 <= self.cy < self.height):
            raise ValueError(f"principal point y={self.cy} outside image height {self.height}")

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.fx, 0.0, self.cx], [0.0, self.fy, self.cy], [0.0, 0.0, 1.0]])

    @property
    def inverse_matrix(self) -> np.ndarray:
        return np.array(
            [
                [1.0 / self.fx, 0.0, -self.cx / self.fx],
                [0.0, 1.0 / self.fy, -self.cy / self.fy],
                [0.0, 0.0, 1.0],
            ]
        )


def line_coefficients(sp: np.ndarray, ep: np.ndarray) -> np.ndarray:
    """Unit homogeneous coefficients of the image line through two pixels.

    The first component with magnitude > 1e-12 is made positive so the
    result is a deterministic representative of the projective line.
    """
    sp = np.asarray(sp, dtype=float)
    ep = np.asarray(ep, dtype=float)
    if np.linalg.norm(ep - sp) < 1e-9:
        raise DegenerateSegmentError(f"segment endpoints coincide: sp={sp} ep={ep}")
    l = np.cross(np.array([sp[0], sp[1], 1.0]), np.array([ep[0], ep[1], 1.0]))
    return canonical_sign(_unit(l))


def great_circle_normal(l: np.ndarray, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Unit normal of the great circle an image line cuts on the Gaussian sphere.

    This is K^T l normalized: the plane through the camera center that
    contains the 3D line has this normal in camera coordinates.
    """
    s = intrinsics.matrix.T @ np.asarray(l, dtype=float)
    return canonical_sign(_unit(s))


@dataclass(frozen=True)
class LineObservation:
    """A 2D segment with its derived homogeneous line and great-circle normal."""

    sp: np.ndarray
    ep: np.ndarray
    l: np.ndarray
    s: np.ndarray
    length: float

    def __post_init__(self):
        object.__setattr__(self, "sp", _freeze(self.sp))
        object.__setattr__(self, "ep", _freeze(self.ep))
        object.__setattr__(self, "l", _freeze(self.l))
        object.__setattr__(self, "s", _freeze(self.s))

    @classmethod
    def from_endpoints(cls, sp, ep, intrinsics: CameraIntrinsics) -> "LineObservation":
        sp = np.asarray(sp, dtype=float)
        ep = np.asarray(ep, dtype=float)
        l = line_coefficients(sp, ep)
        s = great_circle_normal(l, intrinsics)
        return cls(sp=sp, ep=ep, l=l, s=s, length=float(np.linalg.norm(ep - sp)))

    @property
    def direction_angle(self) -> float:
        """Orientation of the segment in the image plane, folded into [0, pi)."""
        d = self.ep - self.sp
        return math.atan2(d[1], d[0]) % math.pi


def skew(v: np.ndarray) -> np.ndarray:
    """Skew-symmetric matrix such that skew(v) @ u == cross(v, u)."""
    return np.array(
        [[0.0, -v[2], v[1]], [v[2], 0.0, -v[0]], [-v[1], v[0], 0.0]]
    )


def exp_so3(omega: np.ndarray) -> np.ndarray:
    """Rodrigues exponential map from an axis-angle vector to a rotation matrix."""
    omega = np.asarray(omega, dtype=float)
    theta = np.linalg.norm(omega)
    if theta < 1e-12:
        W = skew(omega)
        return np.eye(3) + W + 0.5 * (W @ W)
    axis = omega / theta
    W = skew(axis)
    return np.eye(3) + math.sin(theta) * W + (1.0 - math.cos(theta)) * (W @ W)


def log_so3(R: np.ndarray) -> np.ndarray:
    """Axis-angle vector of a rotation matrix, with angle in [0, pi].

    At angle exactly pi the axis sign is ambiguous; the axis whose
    largest-magnitude component is positive is returned.
    """
    R = np.asarray(R, dtype=float)
    trace = np.clip((np.trace(R) - 1.0) * 0.5, -1.0, 1.0)
    theta = math.acos(trace)
    if theta < 1e-7:
        # first-order: R ~ I + skew(omega)
        return np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]]) * 0.5
    if theta > math.pi - 1e-7:
        # near pi the antisymmetric part vanishes; recover axis from R + I
        B = (R + np.eye(3)) * 0.5
        axis = np.sqrt(np.clip(np.diag(B), 0.0, None))
        k = int(np.argmax(axis))
        # fix relative signs from the off-diagonal terms of the symmetric part
        if axis[k] > 0:
            for i in range(3):
                if i != k and axis[i] > 1e-9:
                    axis[i] = math.copysign(axis[i], B[i, k] / axis[k])
        axis = _unit(axis)
        if axis[int(np.argmax(np.abs(axis)))] < 0:
            axis = -axis
        return axis * theta
    return (
        np.array([R[2, 1] - R[1, 2], R[0, 2] - R[2, 0], R[1, 0] - R[0, 1]])
        * theta
        / (2.0 * math.sin(theta))
    )


def geodesic_angle(Ra: np.ndarray, Rb: np.ndarray) -> float:
    """Rotation angle between two rotation matrices, in radians."""
    return float(np.linalg.norm(log_so3(np.asarray(Ra).T @ np.asarray(Rb))))


def nearest_rotation(M: np.ndarray) -> np.ndarray:
    """Orthogonal polar factor of M with determinant +1.

    Repeated composition of finite-precision rotations drifts off SO(3)
    geometrically if left unchecked; snapping through this keeps every
    derived rotation orthonormal to machine precision.
    """
    U, _, Vt = np.linalg.svd(np.asarray(M, dtype=float))
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        U = U.copy()
        U[:, 2] = -U[:, 2]
    return U @ Vt


def is_rotation(R: np.ndarray, tol: float = 1e-9) -> bool:
    R = np.asarray(R, dtype=float)
    if R.shape != (3, 3):
        return False
    return (
        np.allclose(R.T @ R, np.eye(3), atol=tol)
        and abs(np.linalg.det(R) - 1.0) < tol
    )


@dataclass(frozen=True)
class Pose:
    """World-to-camera rigid transform with a timestamp in seconds."""

    rotation: np.ndarray
    translation: np.ndarray
    timestamp: float = 0.0

    def __post_init__(self):
        R = np.asarray(self.rotation, dtype=float)
        t = np.asarray(self.translation, dtype=float).reshape(3)
        if not is_rotation(R, tol=1e-6):
            raise ValueError("rotation is not a valid member of SO(3)")
        if not (np.all(np.isfinite(t)) and math.isfinite(self.timestamp)):
            raise ValueError("translation and timestamp must be finite")
        object.__setattr__(self, "rotation", _freeze(R))
        object.__setattr__(self, "translation", _freeze(t))

    @classmethod
    def identity(cls, timestamp: float = 0.0) -> "Pose":
        return cls(np.eye(3), np.zeros(3), timestamp)

    def camera_center(self) -> np.ndarray:
        """Camera position in world coordinates."""
        return -self.rotation.T @ self.translation

    def transform(self, X: np.ndarray) -> np.ndarray:
        """World point(s) to camera coordinates; accepts (3,) or (n, 3)."""
        X = np.asarray(X, dtype=float)
        return X @ self.rotation.T + self.translation


def project(X: np.ndarray, pose: Pose, intrinsics: CameraIntrinsics) -> np.ndarray:
    """Pinhole projection of a single world point to pixel coordinates."""
    Xc = pose.rotation @ np.asarray(X, dtype=float) + pose.translation
    if Xc[2] <= 1e-9:
        raise BehindCameraError(f"point depth {Xc[2]:.3g} m is not in front of the camera")
    return np.array(
        [
            intrinsics.fx * Xc[0] / Xc[2] + intrinsics.cx,
            intrinsics.fy * Xc[1] / Xc[2] + intrinsics.cy,
        ]
    )


def project_points(
    X: np.ndarray, R: np.ndarray, t: np.ndarray, intrinsics: CameraIntrinsics
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized projection of an (n, 3) array of world points.

    Returns ``(pixels, in_front)`` where rows of ``pixels`` with
    ``in_front == False`` are NaN instead of raising.
    """
    X = np.asarray(X, dtype=float).reshape(-1, 3)
    Xc = X @ np.asarray(R).T + np.asarray(t).reshape(3)
    in_front = Xc[:, 2] > 1e-9
    z = np.where(in_front, Xc[:, 2], np.nan)
    pix = np.empty((len(X), 2))
    pix[:, 0] = intrinsics.fx * Xc[:, 0] / z + intrinsics.cx
    pix[:, 1] = intrinsics.fy * Xc[:, 1] / z + intrinsics.cy
    return pix, in_front


def quaternion_to_rotation(q: np.ndarray) -> np.ndarray:
    """Rotation matrix from a unit quaternion in (qx, qy, qz, qw) order."""
    x, y, z, w = np.asarray(q, dtype=float) / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
            [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
            [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
        ]
    )


def rotation_to_quaternion(R: np.ndarray) -> np.ndarray:
    """Unit quaternion (qx, qy, qz, qw) of a rotation matrix, with qw >= 0.

    Uses the largest diagonal combination for numerical stability.
    """
    R = np.asarray(R, dtype=float)
    tr = np.trace(R)
    if tr > 0:
        s = math.sqrt(tr + 1.0) * 2.0
        q = np.array(
            [(R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s, 0.25 * s]
        )
    else:
        i = int(np.argmax(np.diag(R)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(1.0 + R[i, i] - R[j, j] - R[k, k], 0.0)) * 2.0
        q = np.empty(4)
        q[i] = 0.25 * s
        q[j] = (R[j, i] + R[i, j]) / s
        q[k] = (R[k, i] + R[i, k]) / s
        q[3] = (R[k, j] - R[j, k]) / s
    q /= np.linalg.norm(q)
    if q[3] < 0:
        q = -q
    return q
