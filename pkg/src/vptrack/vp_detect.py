"""Vanishing-point detection on the Gaussian sphere.

Pairs of line segments vote for the intersection direction of their
great circles on a 90x360 hemisphere grid (1 degree cells). The three
mutually orthogonal directions whose cells collect the highest total
score are returned, and lines are clustered by the direction their
great circle is most nearly perpendicular to.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import voting
from .errors import CoplanarNormalsError, EmptyGridError, InsufficientLinesError
from .geometry import CameraIntrinsics, LineObservation, canonical_hemisphere

GRID_SHAPE = (90, 360)


@dataclass(frozen=True)
class VpConfig:
    """Knobs for the accumulator and the triplet search."""

    pair_cap: int = 20000
    seed: int = 0
    min_segment_length: float = 15.0
    cluster_tau: float = math.radians(1.5)


@dataclass
class PolarGrid:
    """Hemisphere accumulator: rows are latitude degrees, columns longitude."""

    cells: np.ndarray = field(default_factory=lambda: np.zeros(GRID_SHAPE))

    def __post_init__(self):
        self.cells = np.ascontiguousarray(self.cells, dtype=float)
        if self.cells.shape != GRID_SHAPE:
            raise ValueError(f"grid must be {GRID_SHAPE}, got {self.cells.shape}")
        if np.any(self.cells < 0):
            raise ValueError("grid scores must be non-negative")

    def merge(self, other: "PolarGrid") -> "PolarGrid":
        """Cell-wise sum; accumulation distributes over any pair partition."""
        return PolarGrid(self.cells + other.cells)


@dataclass(frozen=True)
class VanishingPointSet:
    """Three orthogonal sphere directions plus their image-plane points."""

    directions: np.ndarray  # (3, 3), rows are unit vectors
    total_score: float
    pixel_vps: np.ndarray | None = None  # (3, 3) homogeneous pixel points

    def __post_init__(self):
        d = np.asarray(self.directions, dtype=float)
        if d.shape != (3, 3):
            raise ValueError("directions must be a (3, 3) array of row vectors")
        if not np.allclose(np.linalg.norm(d, axis=1), 1.0, atol=1e-9):
            raise ValueError("directions must be unit vectors")
        g = d @ d.T
        if np.max(np.abs(g - np.eye(3))) > 1e-6:
            raise ValueError("directions must be mutually orthogonal")
        object.__setattr__(self, "directions", d)


@dataclass(frozen=True)
class ClusterLabels:
    """Per-line labels: 1..3 for the matched direction, 0 for unassigned."""

    labels: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=int))

    def count(self, k: int) -> int:
        return int(np.sum(self.labels == k))

    def indices(self, k: int) -> np.ndarray:
        return np.flatnonzero(self.labels == k)


def pair_vp_candidate(s1: np.ndarray, s2: np.ndarray) -> np.ndarray:
    """Intersection direction of two great circles, canonical hemisphere."""
    v = np.cross(np.asarray(s1, dtype=float), np.asarray(s2, dtype=float))
    n = np.linalg.norm(v)
    if n <= 1e-9:
        raise CoplanarNormalsError("great-circle normals are parallel")
    return canonical_hemisphere(v / n)


def polar_cell(v: np.ndarray) -> tuple[int, int]:
    """(latitude, longitude) cell of a canonical hemisphere direction."""
    lat = int(math.floor(math.degrees(math.asin(min(float(v[2]), 1.0))) + 1e-9))
    lat = min(max(lat, 0), 89)
    lon_rad = math.atan2(v[1], v[0])
    if lon_rad < 0:
        lon_rad += 2.0 * math.pi
    lon = int(math.floor(math.degrees(lon_rad) + 1e-9)) % 360
    return lat, lon


def pair_score(len0: float, len1: float, theta: float) -> float:
    """Vote weight of a segment pair: len0 * len1 * sin(2 theta), floored at 0.

    theta is the acute angle between the two image-plane directions, so
    near-parallel pairs (ill-conditioned intersection) and near-perpendicular
    pairs (unlikely to share a vanishing point) contribute little.
    """
    return max(0.0, len0 * len1 * math.sin(2.0 * theta))


def _pair_indices(n: int, pair_cap: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Row-major upper-triangle pairs, uniformly subsampled past pair_cap."""
    total = n * (n - 1) // 2
    if total <= pair_cap:
        ii, jj = np.triu_indices(n, k=1)
        return ii.astype(np.int64), jj.astype(np.int64)
    rng = np.random.default_rng(seed)
    chosen = np.sort(rng.choice(total, size=pair_cap, replace=False))
    # offsets[i] = number of pairs whose first index is < i
    first = np.arange(n, dtype=np.int64)
    offsets = first * (n - 1) - first * (first - 1) // 2
    ii = np.searchsorted(offsets, chosen, side="right") - 1
    jj = chosen - offsets[ii] + ii + 1
    return ii.astype(np.int64), jj.astype(np.int64)


def build_accumulator(
    lines: list[LineObservation],
    intrinsics: CameraIntrinsics,
    pair_cap: int = 20000,
    seed: int = 0,
) -> PolarGrid:
    """Vote all (capped) line pairs into a fresh polar grid.

    Deterministic for fixed inputs and seed; pairs whose great circles
    coincide are skipped since they define no intersection.
    """
    if len(lines) < 2:
        raise InsufficientLinesError(f"need at least 2 lines, got {len(lines)}")
    normals = np.ascontiguousarray([ln.s for ln in lines])
    lengths = np.ascontiguousarray([ln.length for ln in lines])
    orientations = np.ascontiguousarray([ln.direction_angle for ln in lines])
    ii, jj = _pair_indices(len(lines), pair_cap, seed)
    grid = PolarGrid()
    voting.accumulate_votes(normals, lengths, orientations, ii, jj, grid.cells)
    return grid


def _cell_center(lat: int, lon: int) -> np.ndarray:
    la = math.radians(lat + 0.5)
    lo = math.radians(lon + 0.5)
    return np.array(
        [math.cos(la) * math.cos(lo), math.cos(la) * math.sin(lo), math.sin(la)]
    )


def _plane_basis(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic orthonormal basis of the plane perpendicular to v."""
    e = np.zeros(3)
    e[int(np.argmin(np.abs(v)))] = 1.0
    u = np.cross(v, e)
    u /= np.linalg.norm(u)
    return u, np.cross(v, u)


def _cells_of(directions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized polar_cell over canonical (n, 3) directions."""
    lat = np.floor(np.degrees(np.arcsin(np.clip(directions[:, 2], -1.0, 1.0))) + 1e-9)
    lat = np.clip(lat.astype(int), 0, 89)
    lon_rad = np.arctan2(directions[:, 1], directions[:, 0])
    lon_rad = np.where(lon_rad < 0, lon_rad + 2.0 * np.pi, lon_rad)
    lon = np.floor(np.degrees(lon_rad) + 1e-9).astype(int) % 360
    return lat, lon


def _canonicalize_rows(v: np.ndarray) -> np.ndarray:
    x, y, z = v[:, 0], v[:, 1], v[:, 2]
    sign = np.where(
        np.abs(z) > 1e-12,
        np.sign(z),
        np.where(np.abs(y) > 1e-12, np.sign(y), np.where(x < 0, -1.0, 1.0)),
    )
    return v * sign[:, None]


def _neighborhood_max(cells: np.ndarray) -> np.ndarray:
    """Max over each cell's 3x3 neighborhood (longitude wraps, latitude clamps)."""
    out = cells
    for dlon in (-1, 1):
        out = np.maximum(out, np.roll(cells, dlon, axis=1))
    padded = np.vstack([out[:1], out, out[-1:]])
    return np.maximum(np.maximum(padded[:-2], padded[1:-1]), padded[2:])


def search_orthogonal_triplet(
    grid: PolarGrid, intrinsics: CameraIntrinsics | None = None
) -> VanishingPointSet:
    """Best mutually orthogonal direction triplet supported by the grid.

    The strongest cell anchors the first direction; 360 candidates at one
    degree spacing sweep the great circle perpendicular to it, the third
    direction closing each triplet by cross product. Candidate support is
    read from the 3x3 neighborhood of the candidate's cell: the quantized
    anchor shifts the sweep by up to a cell diagonal, so an exact-cell
    read would step over tightly concentrated votes. The winning triplet
    (highest summed support, ties broken by the lowest longitude index of
    the second direction) is orthonormalized by Gram-Schmidt anchored on
    the first direction.
    """
    cells = grid.cells
    if not np.any(cells > 0):
        raise EmptyGridError("accumulator contains no votes")
    lat1, lon1 = np.unravel_index(int(np.argmax(cells)), cells.shape)
    v1 = _cell_center(int(lat1), int(lon1))
    score1 = cells[lat1, lon1]

    u, w = _plane_basis(v1)
    alpha = np.radians(np.arange(360.0))
    v2 = np.cos(alpha)[:, None] * u + np.sin(alpha)[:, None] * w
    v3 = np.cross(np.broadcast_to(v1, v2.shape), v2)
    v2c = _canonicalize_rows(v2)
    v3c = _canonicalize_rows(v3)
    lat2, lon2 = _cells_of(v2c)
    lat3, lon3 = _cells_of(v3c)
    support = _neighborhood_max(cells)
    scores = score1 + support[lat2, lon2] + support[lat3, lon3]

    best_score = scores.max()
    tied = np.flatnonzero(scores == best_score)
    best = int(tied[np.argmin(lon2[tied])])

    d1 = v1
    d2 = v2[best] - np.dot(v2[best], d1) * d1
    d2 /= np.linalg.norm(d2)
    d3 = np.cross(d1, d2)
    directions = np.vstack(
        [canonical_hemisphere(d1), canonical_hemisphere(d2), canonical_hemisphere(d3)]
    )
    pixel_vps = None
    if intrinsics is not None:
        pixel_vps = directions @ intrinsics.matrix.T
    return VanishingPointSet(
        directions=directions, total_score=float(best_score), pixel_vps=pixel_vps
    )


def cluster_lines(
    lines: list[LineObservation], vps: VanishingPointSet, tau: float
) -> ClusterLabels:
    """Assign each line to the direction most orthogonal to its normal.

    A line joins cluster k only if |s . delta_k| <= sin(tau); otherwise it
    stays unassigned (label 0). Ties go to the smallest k.
    """
    if not lines:
        return ClusterLabels(np.zeros(0, dtype=int))
    S = np.array([ln.s for ln in lines])
    dots = np.abs(S @ vps.directions.T)
    best = np.argmin(dots, axis=1)
    ok = dots[np.arange(len(lines)), best] <= math.sin(tau)
    return ClusterLabels(np.where(ok, best + 1, 0))


def estimate_vps(
    lines: list[LineObservation],
    intrinsics: CameraIntrinsics,
    config: VpConfig | None = None,
) -> VanishingPointSet:
    """Filter short segments, vote, and search: the standard detection path."""
    config = config or VpConfig()
    kept = [ln for ln in lines if ln.length >= config.min_segment_length]
    if len(kept) < 2:
        raise InsufficientLinesError(
            f"only {len(kept)} of {len(lines)} segments pass the "
            f"{config.min_segment_length:.0f} px length filter"
        )
    grid = build_accumulator(kept, intrinsics, pair_cap=config.pair_cap, seed=config.seed)
    return search_orthogonal_triplet(grid, intrinsics)
