"""Deterministic synthetic Manhattan world used as the verification oracle.

Scenes are boxes of axis-aligned 3D segments plus free 3D points around
the world origin. Trajectories view the box from generic diagonal
directions: if a Manhattan axis is perpendicular to the optical axis its
vanishing point lies at infinity, the lines of that axis project exactly
parallel, and the pair score sin(2 theta) leaves them voteless, so
cameras keep all three axes well away from the image plane. Ground-truth
poses and axis labels ride along as test-only side channels; tracking
code never reads them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyViewError
from .geometry import CameraIntrinsics, LineObservation, Pose, project_points
from .translation import PointCorrespondence

DEFAULT_EXTENTS = np.array([[-2.0, 2.0], [-2.0, 2.0], [-2.0, 2.0]])


def default_intrinsics() -> CameraIntrinsics:
    return CameraIntrinsics(fx=500.0, fy=500.0, cx=320.0, cy=240.0, width=640, height=480)


@dataclass(frozen=True)
class SyntheticScene:
    """Axis-aligned segments, free points, and the box containing them."""

    segments3d: np.ndarray  # (m, 2, 3) endpoint pairs
    segment_axes: np.ndarray  # (m,) axis labels in {1, 2, 3}
    points3d: np.ndarray  # (p, 3)
    extents: np.ndarray  # (3, 2) per-axis lo/hi in meters

    def center(self) -> np.ndarray:
        return self.extents.mean(axis=1)


@dataclass(frozen=True)
class FrameObservation:
    """Everything the tracker may see in one frame, plus oracle side data.

    ``gt_pose``, ``line_axes`` and ``point_is_outlier`` exist for tests
    and evaluation only.
    """

    frame_index: int
    timestamp: float
    lines: list = field(default_factory=list)
    points: list = field(default_factory=list)
    gt_pose: Pose | None = None
    line_axes: np.ndarray | None = None
    point_is_outlier: np.ndarray | None = None


def generate_scene(
    seed: int,
    n_segments_per_axis: int = 15,
    n_points: int = 60,
    extents: np.ndarray | None = None,
) -> SyntheticScene:
    """Uniform axis-aligned segments (lengths U[0.5, 2.0] m) and points."""
    if n_segments_per_axis < 1 or n_points < 1:
        raise ValueError("counts must be at least 1")
    extents = np.asarray(DEFAULT_EXTENTS if extents is None else extents, dtype=float)
    rng = np.random.default_rng(seed)
    segs = []
    axes = []
    for axis in range(3):
        lo, hi = extents[axis]
        span = hi - lo
        for _ in range(n_segments_per_axis):
            length = min(rng.uniform(0.5, 2.0), span) if span > 0 else 0.0
            start = np.array([rng.uniform(e[0], e[1]) for e in extents])
            if span > length:
                start[axis] = rng.uniform(lo, hi - length)
            else:
                start[axis] = lo
            end = start.copy()
            end[axis] += length
            segs.append([start, end])
            axes.append(axis + 1)
    points = np.column_stack([rng.uniform(e[0], e[1], size=n_points) for e in extents])
    return SyntheticScene(
        segments3d=np.array(segs),
        segment_axes=np.array(axes, dtype=int),
        points3d=points,
        extents=extents,
    )


def _in_bounds(pix: np.ndarray, image_size: tuple[int, int]) -> np.ndarray:
    w, h = image_size
    return (pix[:, 0] >= 0) & (pix[:, 0] < w) & (pix[:, 1] >= 0) & (pix[:, 1] < h)


def render_frame(
    scene: SyntheticScene,
    gt_pose: Pose,
    intrinsics: CameraIntrinsics,
    image_size: tuple[int, int] = (640, 480),
    pixel_noise_sigma: float = 0.0,
    outlier_fraction: float = 0.0,
    seed: int = 0,
    frame_index: int = 0,
) -> FrameObservation:
    """Project the scene into one camera, with optional noise and outliers.

    Entities with any endpoint behind the camera or outside the image are
    dropped before noise is applied. Line coefficients and great-circle
    normals are recomputed from the noisy endpoints, and a fixed fraction
    of point observations is replaced by uniform random pixels.
    """
    rng = np.random.default_rng(seed)
    R, t = gt_pose.rotation, gt_pose.translation

    ends = scene.segments3d.reshape(-1, 3)
    pix, in_front = project_points(ends, R, t, intrinsics)
    seg_ok = (in_front & _in_bounds(pix, image_size)).reshape(-1, 2)
    seg_keep = seg_ok.all(axis=1)
    seg_pix = pix.reshape(-1, 2, 2)[seg_keep]
    if pixel_noise_sigma > 0 and len(seg_pix):
        seg_pix = seg_pix + rng.normal(0.0, pixel_noise_sigma, size=seg_pix.shape)

    lines = []
    line_axes = []
    for k in range(len(seg_pix)):
        sp, ep = seg_pix[k]
        if np.linalg.norm(ep - sp) < 1e-9:
            continue
        lines.append(LineObservation.from_endpoints(sp, ep, intrinsics))
        line_axes.append(scene.segment_axes[seg_keep][k])

    ppix, p_front = project_points(scene.points3d, R, t, intrinsics)
    p_keep = p_front & _in_bounds(ppix, image_size)
    ppix = ppix[p_keep]
    pX = scene.points3d[p_keep]
    if pixel_noise_sigma > 0 and len(ppix):
        ppix = ppix + rng.normal(0.0, pixel_noise_sigma, size=ppix.shape)
    is_outlier = np.zeros(len(ppix), dtype=bool)
    n_out = int(round(outlier_fraction * len(ppix)))
    if n_out > 0:
        sel = rng.choice(len(ppix), size=n_out, replace=False)
        w, h = image_size
        ppix[sel, 0] = rng.uniform(0, w, size=n_out)
        ppix[sel, 1] = rng.uniform(0, h, size=n_out)
        is_outlier[sel] = True
    points = [PointCorrespondence(X=pX[i], x=ppix[i]) for i in range(len(ppix))]

    if not lines and not points:
        raise EmptyViewError("no scene entity is visible from this pose")
    return FrameObservation(
        frame_index=frame_index,
        timestamp=gt_pose.timestamp,
        lines=lines,
        points=points,
        gt_pose=gt_pose,
        line_axes=np.array(line_axes, dtype=int),
        point_is_outlier=is_outlier,
    )


def _look_rotation(forward: np.ndarray, down: np.ndarray = np.array([0.0, 1.0, 0.0])) -> np.ndarray:
    """World-to-camera rotation with camera z along ``forward``, y near ``down``."""
    z = forward / np.linalg.norm(forward)
    x = np.cross(down, z)
    x /= np.linalg.norm(x)
    y = np.cross(z, x)
    return np.vstack([x, y, z])


def look_at_pose(position, target, timestamp: float = 0.0) -> Pose:
    """Pose of a camera at ``position`` looking at ``target``."""
    position = np.asarray(position, dtype=float)
    R = _look_rotation(np.asarray(target, dtype=float) - position)
    return Pose(rotation=R, translation=-R @ position, timestamp=timestamp)


def _yaw_matrix(angle: float) -> np.ndarray:
    c, s = math.cos(angle), math.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def generate_trajectory(
    seed: int,
    n_frames: int,
    style: str = "corridor",
    scene_center: np.ndarray = np.array([0.0, 0.0, 0.0]),
    fps: float = 30.0,
) -> list[Pose]:
    """Smooth camera path keeping the scene in view from a diagonal angle.

    ``corridor`` advances straight toward the scene with a gentle
    sinusoidal yaw (up to 10 degrees) and a few centimeters of lateral
    sway so the positions are not collinear; ``orbit`` circles the scene
    center on a tilted ring at fixed radius. Timestamps tick at ``fps``.
    """
    if n_frames < 2:
        raise ValueError(f"need at least 2 frames, got {n_frames}")
    if style not in ("corridor", "orbit"):
        raise ValueError(f"unknown trajectory style: {style!r}")
    rng = np.random.default_rng(seed)
    center = np.asarray(scene_center, dtype=float)
    poses = []
    if style == "corridor":
        # diagonal approach axis: every Manhattan axis stays well off the
        # image plane so all three vanishing points remain finite
        u = np.array([0.55, 0.40, 0.73]) + 0.05 * rng.uniform(-1, 1, size=3)
        u /= np.linalg.norm(u)
        side = np.cross(u, np.array([0.0, 1.0, 0.0]))
        side /= np.linalg.norm(side)
        speed = 0.3 * (1.0 + 0.2 * rng.uniform(-1, 1))  # m/s
        yaw_hz = 0.5 * (1.0 + 0.2 * rng.uniform(-1, 1))
        sway_hz = 0.2 * (1.0 + 0.2 * rng.uniform(-1, 1))
        start = center - 10.0 * u
        for i in range(n_frames):
            ts = i / fps
            yaw = math.radians(10.0) * math.sin(2.0 * math.pi * yaw_hz * ts)
            sway = 0.05 * math.sin(2.0 * math.pi * sway_hz * ts)
            pos = start + speed * ts * u + sway * side
            R = _yaw_matrix(yaw) @ _look_rotation(center - pos)
            poses.append(Pose(rotation=R, translation=-R @ pos, timestamp=ts))
    else:
        # ring tilted against the Manhattan axes
        w = np.array([0.35, 1.0, 0.25]) + 0.05 * rng.uniform(-1, 1, size=3)
        w /= np.linalg.norm(w)
        a = np.cross(w, np.array([0.3, 0.2, 1.0]))
        a /= np.linalg.norm(a)
        b = np.cross(w, a)
        radius = 10.0
        rate = math.radians(0.3 * (1.0 + 0.2 * rng.uniform(-1, 1)))  # per frame
        for i in range(n_frames):
            ts = i / fps
            alpha = rate * i
            pos = center + radius * (math.cos(alpha) * a + math.sin(alpha) * b)
            R = _look_rotation(center - pos)
            poses.append(Pose(rotation=R, translation=-R @ pos, timestamp=ts))
    return poses


def render_sequence(
    scene: SyntheticScene,
    trajectory: list[Pose],
    intrinsics: CameraIntrinsics,
    image_size: tuple[int, int] = (640, 480),
    pixel_noise_sigma: float = 0.0,
    outlier_fraction: float = 0.0,
    seed: int = 0,
) -> list[FrameObservation]:
    """Render every trajectory pose; per-frame noise seeds derive from ``seed``."""
    return [
        render_frame(
            scene,
            pose,
            intrinsics,
            image_size=image_size,
            pixel_noise_sigma=pixel_noise_sigma,
            outlier_fraction=outlier_fraction,
            seed=seed * 100003 + i,
            frame_index=i,
        )
        for i, pose in enumerate(trajectory)
    ]
