"""Frame-by-frame tracking loop.

Each frame: predict the pose with the constant-velocity model, detect
vanishing points and cluster lines, refine per-cluster directions by
SVD, anchor the Manhattan frame once enough clusters are available,
optimize the absolute rotation against the anchored frame, and refine
the translation with RANSAC. Every failure falls back to the prediction
and is recorded in the per-frame diagnostics.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import (
    DegenerateClusterError,
    EmptyGridError,
    InsufficientLinesError,
    InsufficientObservationsError,
    InsufficientPointsError,
    NoConsensusError,
    NoMatchError,
    NoPriorPoseError,
    RankDeficientError,
    TrackingError,
    UnderconstrainedError,
)
from .geometry import CameraIntrinsics, Pose, nearest_rotation
from .manhattan_rotation import (
    LMConfig,
    ManhattanFrame,
    dominant_direction,
    frame_from_directions,
    match_vps_to_frame,
    optimize_rotation,
)
from .synthworld import FrameObservation
from .translation import RansacConfig, ransac_translation
from .vp_detect import VpConfig, cluster_lines, estimate_vps


class FrameTrackingError(TrackingError):
    """A per-frame failure, annotated with the frame index."""

    def __init__(self, message, frame_index):
        self.frame_index = frame_index
        super().__init__(message)


@dataclass(frozen=True)
class TrackerConfig:
    vp: VpConfig = field(default_factory=VpConfig)
    lm: LMConfig = field(default_factory=LMConfig)
    ransac: RansacConfig = field(default_factory=RansacConfig)
    anchor_min_lines: int = 5
    refine_min_lines: int = 2
    enable_rotation_opt: bool = True
    enable_translation_refine: bool = True

    @classmethod
    def from_dict(cls, d: dict) -> "TrackerConfig":
        """Build a config from flat JSON-style keys; *_deg keys are degrees."""
        vp = VpConfig(
            pair_cap=int(d.get("pair_cap", 20000)),
            seed=int(d.get("vote_seed", 0)),
            min_segment_length=float(d.get("min_segment_length", 15.0)),
            cluster_tau=math.radians(float(d.get("cluster_tau_deg", 1.5))),
        )
        lm = LMConfig(
            lambda0=float(d.get("lm_lambda0", 1e-3)),
            max_iterations=int(d.get("lm_max_iterations", 20)),
        )
        ransac = RansacConfig(
            iterations=int(d.get("ransac_iterations", 200)),
            seed=int(d.get("ransac_seed", 0)),
            inlier_threshold_px=float(d.get("ransac_inlier_px", 2.0)),
        )
        return cls(
            vp=vp,
            lm=lm,
            ransac=ransac,
            anchor_min_lines=int(d.get("anchor_min_lines", 5)),
            refine_min_lines=int(d.get("refine_min_lines", 2)),
            enable_rotation_opt=bool(d.get("enable_rotation_opt", True)),
            enable_translation_refine=bool(d.get("enable_translation_refine", True)),
        )


@dataclass
class FrameDiagnostics:
    frame_index: int
    timestamp: float
    n_lines: int
    n_points: int
    cluster_sizes: tuple = (0, 0, 0)
    vp_score: float = float("nan")
    vp_failed: bool = False
    anchored: bool = False
    n_matched_axes: int = 0
    rotation_cost_initial: float = float("nan")
    rotation_cost_final: float = float("nan")
    rotation_iterations: int = 0
    rotation_fallback: bool = True
    n_inliers: int = 0
    translation_fallback: bool = True


@dataclass
class TrackerState:
    config: TrackerConfig
    intrinsics: CameraIntrinsics
    frame: ManhattanFrame | None = None
    last_pose: Pose | None = None
    second_last_pose: Pose | None = None
    diagnostics: list = field(default_factory=list)


def propagate_pose(state: TrackerState) -> Pose:
    """Constant-velocity prediction: reapply the last inter-frame motion.

    With a single prior pose the prediction is that pose unchanged.
    """
    if state.last_pose is None:
        raise NoPriorPoseError("no prior pose to propagate from")
    if state.second_last_pose is None:
        return state.last_pose
    R1, t1 = state.second_last_pose.rotation, state.second_last_pose.translation
    R2, t2 = state.last_pose.rotation, state.last_pose.translation
    R_rel = R2 @ R1.T
    t_rel = t2 - R_rel @ t1
    return Pose(
        rotation=nearest_rotation(R_rel @ R2),
        translation=R_rel @ t2 + t_rel,
        timestamp=state.last_pose.timestamp,
    )


def _cluster_directions(state: TrackerState, obs: FrameObservation):
    """VP detection, clustering, and SVD refinement for one frame.

    Returns (refined directions (m, 3), their line counts, cluster sizes,
    vp score) with m possibly 0; failures surface as (None, ...) so the
    caller can fall back.
    """
    cfg = state.config
    kept = [ln for ln in obs.lines if ln.length >= cfg.vp.min_segment_length]
    try:
        vps = estimate_vps(kept, state.intrinsics, cfg.vp)
    except (InsufficientLinesError, EmptyGridError):
        return None, None, (0, 0, 0), float("nan")
    labels = cluster_lines(kept, vps, cfg.vp.cluster_tau)
    sizes = tuple(labels.count(k) for k in (1, 2, 3))
    normals = np.array([ln.s for ln in kept])
    refined, counts = [], []
    for k in (1, 2, 3):
        idx = labels.indices(k)
        if len(idx) < cfg.refine_min_lines:
            continue
        try:
            d, _ = dominant_direction(normals[idx])
        except DegenerateClusterError:
            continue
        refined.append(d)
        counts.append(len(idx))
    return np.array(refined), np.array(counts), sizes, vps.total_score


def _maybe_anchor(state, obs, R_current, refined, counts, diag):
    """Freeze the Manhattan frame on the first frame with enough support."""
    if state.frame is not None or refined is None:
        return
    strong = [i for i in range(len(refined)) if counts[i] >= state.config.anchor_min_lines]
    if len(strong) < 2:
        return
    # express camera-frame directions in the world frame before freezing
    world_dirs = [R_current.T @ refined[i] for i in strong[:3]]
    try:
        state.frame = frame_from_directions(world_dirs, obs.frame_index)
        diag.anchored = True
    except (TrackingError, ValueError):
        state.frame = None


def track_frame(state: TrackerState, obs: FrameObservation) -> Pose:
    """Estimate the pose of one frame and update the tracker state."""
    if len(obs.lines) < 2 or len(obs.points) < 2:
        raise InsufficientObservationsError(
            f"frame {obs.frame_index}: need >= 2 lines and >= 2 points, "
            f"got {len(obs.lines)} lines, {len(obs.points)} points"
        )
    cfg = state.config
    pred = propagate_pose(state)
    diag = FrameDiagnostics(
        frame_index=obs.frame_index,
        timestamp=obs.timestamp,
        n_lines=len(obs.lines),
        n_points=len(obs.points),
    )

    refined, counts, diag.cluster_sizes, diag.vp_score = _cluster_directions(state, obs)
    diag.vp_failed = refined is None

    _maybe_anchor(state, obs, pred.rotation, refined, counts, diag)

    R = pred.rotation
    if (
        cfg.enable_rotation_opt
        and state.frame is not None
        and not diag.anchored  # the anchor frame defines the gauge; nothing to optimize
        and refined is not None
        and len(refined) > 0
    ):
        try:
            problem = match_vps_to_frame(refined, state.frame, pred.rotation, weights=counts)
            diag.n_matched_axes = problem.size
            result = optimize_rotation(problem, cfg.lm)
            R = result.rotation
            diag.rotation_cost_initial = result.initial_cost
            diag.rotation_cost_final = result.cost
            diag.rotation_iterations = result.iterations
            diag.rotation_fallback = False
        except (NoMatchError, UnderconstrainedError):
            pass

    t = pred.translation
    if cfg.enable_translation_refine:
        try:
            t, mask = ransac_translation(obs.points, R, state.intrinsics, cfg.ransac)
            diag.n_inliers = int(mask.sum())
            diag.translation_fallback = False
        except (NoConsensusError, InsufficientPointsError, RankDeficientError):
            pass

    pose = Pose(rotation=R, translation=t, timestamp=obs.timestamp)
    state.second_last_pose = state.last_pose
    state.last_pose = pose
    state.diagnostics.append(diag)
    return pose


def _seed_frame(state: TrackerState, obs: FrameObservation, pose: Pose) -> None:
    """Record a given pose for a frame, still running detection/anchoring."""
    diag = FrameDiagnostics(
        frame_index=obs.frame_index,
        timestamp=obs.timestamp,
        n_lines=len(obs.lines),
        n_points=len(obs.points),
    )
    refined, counts, diag.cluster_sizes, diag.vp_score = _cluster_directions(state, obs)
    diag.vp_failed = refined is None
    _maybe_anchor(state, obs, pose.rotation, refined, counts, diag)
    state.second_last_pose = state.last_pose
    state.last_pose = pose
    state.diagnostics.append(diag)


def run_sequence(
    observations: list[FrameObservation],
    config: TrackerConfig,
    intrinsics: CameraIntrinsics,
    initial_poses: list[Pose] | None = None,
) -> tuple[list[Pose], list[FrameDiagnostics]]:
    """Track a whole sequence; deterministic for a fixed config.

    The first frame takes the identity pose (world = first camera) unless
    ``initial_poses`` provides one or two bootstrap poses; two priors give
    the motion model an initial velocity.
    """
    if len(observations) < 2:
        raise ValueError(f"need at least 2 frames, got {len(observations)}")
    state = TrackerState(config=config, intrinsics=intrinsics)
    if initial_poses is None:
        initial_poses = [Pose.identity(timestamp=observations[0].timestamp)]
    if not 1 <= len(initial_poses) <= 2:
        raise ValueError("initial_poses must hold 1 or 2 poses")

    trajectory: list[Pose] = []
    for i, obs in enumerate(observations):
        try:
            if i < len(initial_poses):
                pose = replace(initial_poses[i], timestamp=obs.timestamp)
                _seed_frame(state, obs, pose)
            else:
                pose = track_frame(state, obs)
        except TrackingError as exc:
            raise FrameTrackingError(f"frame {obs.frame_index}: {exc}", obs.frame_index) from exc
        trajectory.append(pose)
    return trajectory, state.diagnostics
