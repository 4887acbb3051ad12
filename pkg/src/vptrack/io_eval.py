"""Trajectory files, 7DoF alignment, ATE, and observation file formats.

Trajectories use the TUM convention: one record per line,

    timestamp tx ty tz qx qy qz qw

where (tx, ty, tz) is the camera position in the world frame and the
quaternion rotates camera coordinates into world coordinates. Lines
starting with ``#`` are comments. All files are UTF-8, whitespace
separated, with ``.`` as the decimal separator.

Observation directories hold:

    intrinsics.txt  key/value pairs: fx fy cx cy width height fps
    lines.txt       frame_index x1 y1 x2 y2          (pixels)
    points.txt      frame_index u v X Y Z            (pixels, meters)
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CollinearPointsError,
    InsufficientPairsError,
    MalformedLineError,
    NonIncreasingTimestampError,
)
from .geometry import (
    CameraIntrinsics,
    LineObservation,
    Pose,
    quaternion_to_rotation,
    rotation_to_quaternion,
)
from .synthworld import FrameObservation
from .translation import PointCorrespondence

ASSOCIATION_WINDOW = 0.02  # seconds


def _fmt(x: float) -> str:
    return f"{x:.12g}"


def write_trajectory(poses: list[Pose]) -> str:
    """Render poses as TUM-format text (camera-in-world convention)."""
    out = ["# timestamp tx ty tz qx qy qz qw"]
    for p in poses:
        c = p.camera_center()
        q = rotation_to_quaternion(p.rotation.T)
        fields = [p.timestamp, c[0], c[1], c[2], q[0], q[1], q[2], q[3]]
        out.append(" ".join(_fmt(v) for v in fields))
    return "\n".join(out) + "\n"


def parse_trajectory(text: str, path: str | None = None) -> list[Pose]:
    """Parse TUM-format text into world-to-camera poses."""
    poses: list[Pose] = []
    last_ts = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 8:
            raise MalformedLineError(
                f"expected 8 fields, got {len(parts)}", line_number=lineno, path=path
            )
        try:
            vals = [float(v) for v in parts]
        except ValueError:
            raise MalformedLineError(
                f"non-numeric field in {line!r}", line_number=lineno, path=path
            ) from None
        ts, tx, ty, tz, qx, qy, qz, qw = vals
        if last_ts is not None and ts <= last_ts:
            raise NonIncreasingTimestampError(
                f"timestamp {ts} at line {lineno} does not increase past {last_ts}"
            )
        last_ts = ts
        q = np.array([qx, qy, qz, qw])
        norm = np.linalg.norm(q)
        if abs(norm - 1.0) > 1e-6:
            raise MalformedLineError(
                f"quaternion norm {norm:.8f} deviates from 1", line_number=lineno, path=path
            )
        R_wc = quaternion_to_rotation(q / norm)
        R = R_wc.T
        poses.append(Pose(rotation=R, translation=-R @ np.array([tx, ty, tz]), timestamp=ts))
    return poses


def save_trajectory(poses: list[Pose], path) -> None:
    Path(path).write_text(write_trajectory(poses), encoding="utf-8")


def load_trajectory(path) -> list[Pose]:
    return parse_trajectory(Path(path).read_text(encoding="utf-8"), path=str(path))


def associate(est: list[Pose], gt: list[Pose], window: float = ASSOCIATION_WINDOW):
    """Greedy mutually-unique nearest-timestamp pairing within ``window``."""
    gt_ts = np.array([p.timestamp for p in gt])
    candidates = []
    for i, p in enumerate(est):
        j = int(np.searchsorted(gt_ts, p.timestamp))
        for jj in (j - 1, j):
            if 0 <= jj < len(gt):
                dt = abs(gt_ts[jj] - p.timestamp)
                if dt <= window:
                    candidates.append((dt, i, jj))
    candidates.sort()
    used_i, used_j, pairs = set(), set(), []
    for _, i, j in candidates:
        if i in used_i or j in used_j:
            continue
        used_i.add(i)
        used_j.add(j)
        pairs.append((i, j))
    pairs.sort()
    return pairs


@dataclass(frozen=True)
class Similarity:
    """Similarity transform y = scale * R x + t."""

    scale: float
    rotation: np.ndarray
    translation: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=float)
        return self.scale * points @ self.rotation.T + self.translation


def _check_not_collinear(P: np.ndarray, label: str) -> None:
    sv = np.linalg.svd(P - P.mean(axis=0), compute_uv=False)
    if sv[1] <= 1e-9 * max(sv[0], 1.0):
        raise CollinearPointsError(f"{label} positions are collinear; alignment is degenerate")


def umeyama_align_7dof(est: list[Pose], gt: list[Pose]) -> Similarity:
    """Closed-form similarity (scale, rotation, translation) mapping est to gt.

    Minimizes the summed squared position residuals over the associated
    pairs; the rotation comes from the SVD of the cross-covariance with
    the usual determinant-sign correction.
    """
    pairs = associate(est, gt)
    if len(pairs) < 3:
        raise InsufficientPairsError(f"need >= 3 associated pose pairs, got {len(pairs)}")
    X = np.array([est[i].camera_center() for i, _ in pairs])
    Y = np.array([gt[j].camera_center() for _, j in pairs])
    _check_not_collinear(X, "estimated")
    _check_not_collinear(Y, "ground-truth")

    mu_x = X.mean(axis=0)
    mu_y = Y.mean(axis=0)
    Xc = X - mu_x
    Yc = Y - mu_y
    var_x = float(np.mean(np.sum(Xc**2, axis=1)))
    C = (Yc.T @ Xc) / len(X)
    U, D, Vt = np.linalg.svd(C)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    scale = float(np.trace(np.diag(D) @ S) / var_x)
    t = mu_y - scale * R @ mu_x
    return Similarity(scale=scale, rotation=R, translation=t)


@dataclass(frozen=True)
class AteResult:
    rmse: float
    residuals: np.ndarray  # per-pair position errors in meters
    pairs: list
    similarity: Similarity


def evaluate_ate(est: list[Pose], gt: list[Pose]) -> AteResult:
    """7DoF-aligned absolute translation error over associated pairs."""
    sim = umeyama_align_7dof(est, gt)
    pairs = associate(est, gt)
    X = np.array([est[i].camera_center() for i, _ in pairs])
    Y = np.array([gt[j].camera_center() for _, j in pairs])
    residuals = np.linalg.norm(Y - sim.apply(X), axis=1)
    return AteResult(
        rmse=float(np.sqrt(np.mean(residuals**2))),
        residuals=residuals,
        pairs=pairs,
        similarity=sim,
    )


def ate_rmse(est: list[Pose], gt: list[Pose]) -> float:
    """Root-mean-square position error after 7DoF alignment, in meters."""
    return evaluate_ate(est, gt).rmse


# ---------------------------------------------------------------------------
# observation files


def write_observations(
    out_dir, intrinsics: CameraIntrinsics, frames: list[FrameObservation], fps: float = 30.0
) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines_rows = ["# frame_index x1 y1 x2 y2"]
    points_rows = ["# frame_index u v X Y Z"]
    for f in frames:
        for ln in f.lines:
            vals = [f.frame_index, ln.sp[0], ln.sp[1], ln.ep[0], ln.ep[1]]
            lines_rows.append(" ".join(_fmt(v) for v in vals))
        for pt in f.points:
            vals = [f.frame_index, pt.x[0], pt.x[1], pt.X[0], pt.X[1], pt.X[2]]
            points_rows.append(" ".join(_fmt(v) for v in vals))
    (out / "lines.txt").write_text("\n".join(lines_rows) + "\n", encoding="utf-8")
    (out / "points.txt").write_text("\n".join(points_rows) + "\n", encoding="utf-8")
    intr = [
        "# pinhole intrinsics",
        f"fx {_fmt(intrinsics.fx)}",
        f"fy {_fmt(intrinsics.fy)}",
        f"cx {_fmt(intrinsics.cx)}",
        f"cy {_fmt(intrinsics.cy)}",
        f"width {intrinsics.width if intrinsics.width else 0}",
        f"height {intrinsics.height if intrinsics.height else 0}",
        f"fps {_fmt(fps)}",
    ]
    (out / "intrinsics.txt").write_text("\n".join(intr) + "\n", encoding="utf-8")


def _parse_rows(path: Path, n_fields: int) -> list[list[float]]:
    rows = []
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != n_fields:
            raise MalformedLineError(
                f"expected {n_fields} fields, got {len(parts)}",
                line_number=lineno,
                path=str(path),
            )
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise MalformedLineError(
                f"non-numeric field in {line!r}", line_number=lineno, path=str(path)
            ) from None
    return rows


def read_intrinsics(path) -> tuple[CameraIntrinsics, float]:
    """Parse the key/value intrinsics file; returns (intrinsics, fps)."""
    path = Path(path)
    values: dict[str, float] = {}
    for lineno, raw in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise MalformedLineError(
                f"expected 'key value', got {line!r}", line_number=lineno, path=str(path)
            )
        try:
            values[parts[0]] = float(parts[1])
        except ValueError:
            raise MalformedLineError(
                f"non-numeric value in {line!r}", line_number=lineno, path=str(path)
            ) from None
    missing = {"fx", "fy", "cx", "cy"} - values.keys()
    if missing:
        raise MalformedLineError(f"missing keys: {sorted(missing)}", path=str(path))
    width = int(values.get("width", 0)) or None
    height = int(values.get("height", 0)) or None
    intr = CameraIntrinsics(
        fx=values["fx"], fy=values["fy"], cx=values["cx"], cy=values["cy"],
        width=width, height=height,
    )
    return intr, float(values.get("fps", 30.0))


def read_observations(obs_dir) -> tuple[CameraIntrinsics, float, list[FrameObservation]]:
    """Load an observation directory into per-frame observations.

    Line coefficients and great-circle normals are recomputed from the
    stored endpoints. Frames are indexed densely from 0 to the largest
    index present; a frame may be line-free or point-free.
    """
    obs_dir = Path(obs_dir)
    intr, fps = read_intrinsics(obs_dir / "intrinsics.txt")
    line_rows = _parse_rows(obs_dir / "lines.txt", 5)
    point_rows = _parse_rows(obs_dir / "points.txt", 6)
    n_frames = 0
    for rows in (line_rows, point_rows):
        for r in rows:
            n_frames = max(n_frames, int(r[0]) + 1)
    lines_by_frame: list[list[LineObservation]] = [[] for _ in range(n_frames)]
    points_by_frame: list[list[PointCorrespondence]] = [[] for _ in range(n_frames)]
    for r in line_rows:
        lines_by_frame[int(r[0])].append(
            LineObservation.from_endpoints((r[1], r[2]), (r[3], r[4]), intr)
        )
    for r in point_rows:
        points_by_frame[int(r[0])].append(
            PointCorrespondence(X=np.array(r[3:6]), x=np.array(r[1:3]))
        )
    frames = [
        FrameObservation(
            frame_index=i,
            timestamp=i / fps,
            lines=lines_by_frame[i],
            points=points_by_frame[i],
        )
        for i in range(n_frames)
    ]
    return intr, fps, frames


def write_diagnostics_csv(diagnostics: list, path) -> None:
    """Per-frame tracking diagnostics as CSV."""
    fields = [
        "frame_index", "timestamp", "n_lines", "n_points",
        "cluster1", "cluster2", "cluster3", "vp_score", "vp_failed",
        "anchored", "n_matched_axes", "rotation_cost_initial",
        "rotation_cost_final", "rotation_iterations", "rotation_fallback",
        "n_inliers", "translation_fallback",
    ]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(fields)
        for d in diagnostics:
            writer.writerow(
                [
                    d.frame_index, _fmt(d.timestamp), d.n_lines, d.n_points,
                    d.cluster_sizes[0], d.cluster_sizes[1], d.cluster_sizes[2],
                    _fmt(d.vp_score) if math.isfinite(d.vp_score) else "nan",
                    int(d.vp_failed), int(d.anchored), d.n_matched_axes,
                    _fmt(d.rotation_cost_initial) if math.isfinite(d.rotation_cost_initial) else "nan",
                    _fmt(d.rotation_cost_final) if math.isfinite(d.rotation_cost_final) else "nan",
                    d.rotation_iterations, int(d.rotation_fallback),
                    d.n_inliers, int(d.translation_fallback),
                ]
            )


def write_residuals_csv(result: AteResult, est: list[Pose], path) -> None:
    """Per-pair ATE residuals as CSV."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["est_index", "gt_index", "timestamp", "residual_m"])
        for (i, j), r in zip(result.pairs, result.residuals):
            writer.writerow([i, j, _fmt(est[i].timestamp), _fmt(r)])
