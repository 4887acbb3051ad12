"""Exception types raised by the tracking library."""


class TrackingError(Exception):
    """Base class for all vptrack errors."""


class DegenerateSegmentError(TrackingError):
    """Segment endpoints coincide; no line can be fit."""


class BehindCameraError(TrackingError):
    """Point has non-positive depth in the camera frame."""


class CoplanarNormalsError(TrackingError):
    """Two great-circle normals are parallel; their circles coincide."""


class InsufficientLinesError(TrackingError):
    """Fewer line observations than the operation requires."""


class EmptyGridError(TrackingError):
    """Accumulator holds no votes; no vanishing point can be searched."""


class DegenerateClusterError(TrackingError):
    """Cluster normals do not span a plane; the null direction is ambiguous."""


class NotFrameLikeError(TrackingError):
    """Candidate directions are too far from mutually orthogonal."""


class NoMatchError(TrackingError):
    """No observed vanishing direction matches the stored Manhattan frame."""


class UnderconstrainedError(TrackingError):
    """Too few matched axes to determine a rotation."""


class InsufficientPointsError(TrackingError):
    """Fewer point correspondences than the solver requires."""


class RankDeficientError(TrackingError):
    """Normal equations are singular or too ill-conditioned to solve."""


class NoConsensusError(TrackingError):
    """RANSAC found no sample with enough inlier support."""


class EmptyViewError(TrackingError):
    """No scene entity is visible from the requested pose."""


class NoPriorPoseError(TrackingError):
    """Motion model invoked before any pose exists."""


class InsufficientObservationsError(TrackingError):
    """Frame does not carry enough lines or points to track."""


class MalformedLineError(TrackingError):
    """A text record could not be parsed."""

    def __init__(self, message, line_number=None, path=None):
        self.line_number = line_number
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}:"
        if line_number is not None:
            where += f"{line_number}: "
        super().__init__(where + message)


class NonIncreasingTimestampError(TrackingError):
    """Trajectory timestamps are not strictly increasing."""


class InsufficientPairsError(TrackingError):
    """Too few associated pose pairs for alignment."""


class CollinearPointsError(TrackingError):
    """Associated positions are collinear; 7DoF alignment is degenerate."""
