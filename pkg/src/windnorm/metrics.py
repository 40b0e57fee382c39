"""Orientation quality metrics, noise synthesis, probe diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .core import NormalField, PointCloud
from .errors import LengthMismatch
from .voronoi import SampleSet

__all__ = [
    "AngleStats",
    "angle_stats",
    "add_noise",
    "inside_out_count",
    "chamfer_points",
]

HISTOGRAM_BINS = 36  # 5-degree bins over [0, 180]


@dataclass
class AngleStats:
    """Distribution of angles between predicted and reference normals."""

    mean_deg: float
    std_deg: float
    histogram: np.ndarray  # (36,) counts
    consistency_rate: float  # fraction of angles below 90 degrees

    def to_dict(self) -> dict:
        return {
            "mean_deg": self.mean_deg,
            "std_deg": self.std_deg,
            "consistency_rate": self.consistency_rate,
            "histogram": self.histogram.tolist(),
        }


def angle_stats(pred: NormalField, gt: np.ndarray) -> AngleStats:
    """Per-point angular discrepancy statistics, in degrees."""
    gt = np.asarray(gt, dtype=np.float64)
    if len(pred) != len(gt):
        raise LengthMismatch(f"{len(pred)} predictions vs {len(gt)} references")
    dots = np.einsum("ik,ik->i", pred.vectors, gt)
    ang = np.degrees(np.arccos(np.clip(dots, -1.0, 1.0)))
    hist, _ = np.histogram(ang, bins=HISTOGRAM_BINS, range=(0.0, 180.0))
    return AngleStats(
        mean_deg=float(ang.mean()),
        std_deg=float(ang.std()),
        histogram=hist,
        consistency_rate=float(np.mean(ang < 90.0)),
    )


def add_noise(cloud: PointCloud, level: float, seed: int) -> PointCloud:
    """Perturb each coordinate by N(0, sigma^2) with sigma a fraction
    ``level`` of the bounding-box diagonal."""
    if level < 0:
        raise ValueError("noise level must be >= 0")
    if level == 0.0:
        return PointCloud(cloud.points.copy(), min_points=cloud.min_points)
    lo, hi = cloud.bbox
    sigma = level * float(np.linalg.norm(hi - lo))
    rng = np.random.default_rng(np.uint64(seed))
    pts = cloud.points + rng.normal(0.0, sigma, size=cloud.points.shape)
    return PointCloud(pts, min_points=cloud.min_points)


def inside_out_count(samples: SampleSet, classifier) -> tuple[int, int]:
    """Count probe pairs in the wrong half-spaces.

    Returns (inside_out, same_side): pairs whose exterior probe is inside
    or interior probe outside, and pairs with both probes on one side.
    """
    inside_plus = np.asarray(classifier(samples.plus), dtype=bool)
    inside_minus = np.asarray(classifier(samples.minus), dtype=bool)
    inside_out = int(np.count_nonzero(inside_plus | ~inside_minus))
    same_side = int(np.count_nonzero(inside_plus == inside_minus))
    return inside_out, same_side


def chamfer_points(a: np.ndarray, b: np.ndarray) -> float:
    """Symmetric mean of squared nearest-neighbor distances between two
    point sets."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if len(a) == 0 or len(b) == 0:
        raise ValueError("point sets must be nonempty")
    d_ab, _ = cKDTree(b).query(a)
    d_ba, _ = cKDTree(a).query(b)
    return 0.5 * (float(np.mean(d_ab**2)) + float(np.mean(d_ba**2)))
