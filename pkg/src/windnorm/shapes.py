"""Analytic test shapes with closed-form ground-truth normals."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import PointCloud
from .errors import BadSpec

__all__ = ["ShapeSpec", "generate_shape", "sphere_classifier", "torus_classifier"]


@dataclass(frozen=True)
class ShapeSpec:
    """Sampling recipe: kind is one of sphere | torus | plane-grid | two-spheres."""

    kind: str
    count: int
    seed: int = 0
    major_radius: float = 1.0  # torus R
    minor_radius: float = 0.3  # torus r
    spacing: float = 0.02  # plane-grid step
    gap: float = 0.5  # two-spheres separation


def _sample_sphere(n, rng):
    v = rng.normal(size=(n, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return v


def generate_shape(spec: ShapeSpec) -> tuple[PointCloud, np.ndarray]:
    """Sample a shape and return (cloud, ground-truth outward normals)."""
    kind = spec.kind
    n = spec.count
    rng = np.random.default_rng(np.uint64(spec.seed))
    if kind == "sphere":
        if n < 100:
            raise BadSpec("closed shapes need count >= 100")
        pts = _sample_sphere(n, rng)
        return PointCloud(pts), pts.copy()
    if kind == "torus":
        if n < 100:
            raise BadSpec("closed shapes need count >= 100")
        R, r = spec.major_radius, spec.minor_radius
        if not (R > r > 0):
            raise BadSpec("torus needs R > r > 0")
        pts = np.empty((n, 3))
        nrm = np.empty((n, 3))
        filled = 0
        while filled < n:
            m = 2 * (n - filled) + 16
            theta = rng.uniform(0.0, 2.0 * np.pi, size=m)
            phi = rng.uniform(0.0, 2.0 * np.pi, size=m)
            # area element scales with R + r cos(phi): rejection reweighting
            accept = rng.uniform(0.0, 1.0, size=m) < (R + r * np.cos(phi)) / (R + r)
            theta, phi = theta[accept], phi[accept]
            take = min(len(theta), n - filled)
            ct, st = np.cos(theta[:take]), np.sin(theta[:take])
            cp, sp = np.cos(phi[:take]), np.sin(phi[:take])
            pts[filled : filled + take] = np.stack(
                [(R + r * cp) * ct, (R + r * cp) * st, r * sp], axis=1
            )
            nrm[filled : filled + take] = np.stack([cp * ct, cp * st, sp], axis=1)
            filled += take
        return PointCloud(pts), nrm
    if kind == "plane-grid":
        side = int(round(np.sqrt(n)))
        if side < 2:
            raise BadSpec("plane-grid needs count >= 4")
        h = spec.spacing
        if h <= 0:
            raise BadSpec("plane-grid needs spacing > 0")
        xs = (np.arange(side) - (side - 1) / 2.0) * h
        gx, gy = np.meshgrid(xs, xs, indexing="ij")
        pts = np.stack([gx.ravel(), gy.ravel(), np.zeros(side * side)], axis=1)
        nrm = np.tile([0.0, 0.0, 1.0], (len(pts), 1))
        return PointCloud(pts), nrm
    if kind == "two-spheres":
        if n < 200:
            raise BadSpec("two-spheres needs count >= 200")
        if spec.gap <= 0:
            raise BadSpec("two-spheres needs gap > 0")
        half = n // 2
        offset = np.array([1.0 + spec.gap / 2.0, 0.0, 0.0])
        a = _sample_sphere(half, rng)
        b = _sample_sphere(n - half, rng)
        pts = np.vstack([a - offset, b + offset])
        nrm = np.vstack([a, b])
        return PointCloud(pts), nrm
    raise BadSpec(f"unknown shape kind {kind!r}")


def sphere_classifier(radius: float = 1.0, center=None):
    """Inside/outside oracle for a sphere, usable with orient()."""
    c = np.zeros(3) if center is None else np.asarray(center, dtype=np.float64)

    def classify(points):
        return np.linalg.norm(np.asarray(points) - c, axis=1) < radius

    return classify


def torus_classifier(major_radius: float = 1.0, minor_radius: float = 0.3):
    """Inside/outside oracle for a torus around the z axis."""

    def classify(points):
        p = np.asarray(points)
        ring = np.sqrt(p[:, 0] ** 2 + p[:, 1] ** 2) - major_radius
        return ring**2 + p[:, 2] ** 2 < minor_radius**2

    return classify
