"""Manhattan-world pose tracking from vanishing points."""

from .geometry import (
    CameraIntrinsics,
    LineObservation,
    Pose,
    exp_so3,
    geodesic_angle,
    great_circle_normal,
    line_coefficients,
    log_so3,
    project,
)
from .io_eval import ate_rmse, evaluate_ate, parse_trajectory, umeyama_align_7dof, write_trajectory
from .manhattan_rotation import (
    LMConfig,
    ManhattanFrame,
    RotationProblem,
    dominant_direction,
    match_vps_to_frame,
    optimize_rotation,
    orthonormalize_frame,
    rotation_cost,
    rotation_jacobian,
)
from .pipeline import TrackerConfig, TrackerState, propagate_pose, run_sequence, track_frame
from .synthworld import (
    FrameObservation,
    SyntheticScene,
    generate_scene,
    generate_trajectory,
    render_frame,
)
from .translation import (
    PointCorrespondence,
    RansacConfig,
    build_translation_system,
    ransac_translation,
    solve_normal_equations,
)
from .vp_detect import (
    ClusterLabels,
    PolarGrid,
    VanishingPointSet,
    VpConfig,
    build_accumulator,
    cluster_lines,
    estimate_vps,
    pair_score,
    pair_vp_candidate,
    polar_cell,
    search_orthogonal_triplet,
)

__version__ = "0.1.0"
