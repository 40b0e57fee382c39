"""Fundamental geometric types: point clouds, normal fields, normalization.

Normals are stored as spherical angles (u, v) with
n = (cos u sin v, sin u sin v, cos v), so they stay unit length by
construction while an optimizer moves freely in the angle chart.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .errors import DegenerateCloud, DuplicatePoints

__all__ = [
    "PointCloud",
    "NormalField",
    "CloudTransform",
    "normalize_cloud",
    "angles_to_normal",
    "normal_jacobian",
    "init_random_normals",
    "merge_duplicates",
]


def _as_points(points) -> np.ndarray:
    pts = np.ascontiguousarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise ValueError(f"expected (n, 3) point array, got shape {pts.shape}")
    if not np.isfinite(pts).all():
        raise ValueError("points contain NaN/Inf")
    return pts


@dataclass
class PointCloud:
    """Discrete surface samples with optional per-point area weights.

    ``areas`` carries squared model-length units once estimated; it stays
    ``None`` until then.  ``min_points`` exists for tests that exercise
    two-seed Voronoi construction; production paths keep the default 4.
    """

    points: np.ndarray
    areas: np.ndarray | None = None
    min_points: int = 4

    def __post_init__(self):
        self.points = _as_points(self.points)
        if len(self.points) < self.min_points:
            raise DegenerateCloud(
                f"need at least {self.min_points} points, got {len(self.points)}"
            )
        if self.areas is not None:
            self.areas = np.asarray(self.areas, dtype=np.float64)
            if self.areas.shape != (len(self.points),):
                raise ValueError("areas must be one value per point")
            if not (self.areas > 0).all():
                raise ValueError("areas must be strictly positive")

    @property
    def n(self) -> int:
        return len(self.points)

    @property
    def bbox(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)

    def with_areas(self, areas: np.ndarray) -> "PointCloud":
        return PointCloud(self.points.copy(), areas=areas, min_points=self.min_points)


@dataclass(frozen=True)
class CloudTransform:
    """Uniform scale about the origin composed with a translation.

    Maps original coordinates p to normalized coordinates (p + offset) * scale.
    """

    scale: float
    offset: np.ndarray

    def apply(self, points: np.ndarray) -> np.ndarray:
        return (np.asarray(points, dtype=np.float64) + self.offset) * self.scale

    def invert(self, points: np.ndarray) -> np.ndarray:
        return np.asarray(points, dtype=np.float64) / self.scale - self.offset

    @property
    def is_identity(self) -> bool:
        return self.scale == 1.0 and not np.any(self.offset)


def normalize_cloud(cloud: PointCloud) -> tuple[PointCloud, CloudTransform]:
    """Center the tight bounding box at the origin and scale the largest
    half-extent to 1.  The transform is recorded so results can be mapped
    back to input coordinates."""
    lo, hi = cloud.bbox
    half = (hi - lo) / 2.0
    extent = half.max()
    if extent <= 0.0:
        raise DegenerateCloud("all points coincide")
    center = (hi + lo) / 2.0
    if np.all(np.abs(center) <= 1e-12) and abs(extent - 1.0) <= 1e-12:
        return cloud, CloudTransform(scale=1.0, offset=np.zeros(3))
    transform = CloudTransform(scale=1.0 / extent, offset=-center)
    out = PointCloud(transform.apply(cloud.points), min_points=cloud.min_points)
    return out, transform


def angles_to_normal(u, v) -> np.ndarray:
    """Decode spherical angles into unit normals.

    Scalars give a (3,) vector; arrays of shape (n,) give (n, 3).
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    sv = np.sin(v)
    n = np.stack([np.cos(u) * sv, np.sin(u) * sv, np.cos(v)], axis=-1)
    return n


def normal_jacobian(u, v) -> tuple[np.ndarray, np.ndarray]:
    """Partial derivatives of the decoded normal with respect to (u, v).

    dn_du vanishes at the poles (sin v = 0); callers treat that chart
    degeneracy as a zero gradient component.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    su, cu = np.sin(u), np.cos(u)
    sv, cv = np.sin(v), np.cos(v)
    dn_du = np.stack([-su * sv, cu * sv, np.zeros_like(sv)], axis=-1)
    dn_dv = np.stack([cu * cv, su * cv, -sv], axis=-1)
    return dn_du, dn_dv


@dataclass
class NormalField:
    """Per-point normals stored as (u, v) angle pairs, shape (n, 2)."""

    angles: np.ndarray

    def __post_init__(self):
        self.angles = np.ascontiguousarray(self.angles, dtype=np.float64)
        if self.angles.ndim != 2 or self.angles.shape[1] != 2:
            raise ValueError("angles must have shape (n, 2)")
        if not np.isfinite(self.angles).all():
            raise ValueError("angles contain NaN/Inf")

    def __len__(self) -> int:
        return len(self.angles)

    @property
    def vectors(self) -> np.ndarray:
        return angles_to_normal(self.angles[:, 0], self.angles[:, 1])

    @classmethod
    def from_vectors(cls, vectors: np.ndarray) -> "NormalField":
        vecs = np.asarray(vectors, dtype=np.float64)
        norms = np.linalg.norm(vecs, axis=1, keepdims=True)
        if not (norms > 0).all():
            raise ValueError("zero-length normal vector")
        vecs = vecs / norms
        v = np.arccos(np.clip(vecs[:, 2], -1.0, 1.0))
        u = np.arctan2(vecs[:, 1], vecs[:, 0])
        return cls(np.stack([u, v], axis=1))

    def flipped(self) -> "NormalField":
        return NormalField.from_vectors(-self.vectors)


def init_random_normals(n: int, seed: int) -> NormalField:
    """Draw n normals i.i.d. uniform on the unit sphere, reproducibly.

    u ~ Uniform[0, 2pi); v = arccos(1 - 2t) with t ~ Uniform[0, 1), which
    is area-uniform (no pole clustering).
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(np.uint64(seed))
    u = rng.uniform(0.0, 2.0 * np.pi, size=n)
    v = np.arccos(1.0 - 2.0 * rng.uniform(0.0, 1.0, size=n))
    return NormalField(np.stack([u, v], axis=1))


def merge_duplicates(
    points: np.ndarray, tol: float = 1e-12, min_points: int = 4
) -> tuple[np.ndarray, np.ndarray]:
    """Merge points closer than ``tol``, keeping the first occurrence.

    Returns (unique_points, inverse) where ``inverse[i]`` is the index of
    point i's survivor in the unique array.
    """
    pts = _as_points(points)
    tree = cKDTree(pts)
    pairs = tree.query_pairs(tol, output_type="ndarray")
    parent = np.arange(len(pts))
    # union-find toward the lowest index
    for a, b in sorted(map(tuple, pairs)):
        ra, rb = a, b
        while parent[ra] != ra:
            ra = parent[ra]
        while parent[rb] != rb:
            rb = parent[rb]
        lo, hi = min(ra, rb), max(ra, rb)
        parent[hi] = lo
    for i in range(len(pts)):
        r = i
        while parent[r] != r:
            r = parent[r]
        parent[i] = r
    survivors = np.unique(parent)
    if len(survivors) < min_points:
        raise DuplicatePoints(
            f"only {len(survivors)} distinct points remain after merging"
        )
    remap = np.zeros(len(pts), dtype=np.int64)
    remap[survivors] = np.arange(len(survivors))
    inverse = remap[parent]
    return pts[survivors], inverse
