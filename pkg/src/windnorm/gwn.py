"""Discrete generalized winding number: kernel, field values, gradients,
and per-point area weights.

The field value at a query q is w(q) = sum_i a_i * P(q, p_i) with the
dipole kernel P(q, p, n) = <n, p - q> / (4 pi |p - q|^3), which gives
w = +1 inside a closed surface carrying outward normals and 0 outside.
Evaluation is brute force O(n) per query by contract; summation order is
fixed (index order), so results are reproducible bit for bit.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial import cKDTree

from .core import NormalField, PointCloud
from .errors import SingularPair

__all__ = [
    "EPS_R",
    "Diagnostics",
    "poisson_kernel",
    "kernel_gradient",
    "winding_number",
    "winding_numbers",
    "winding_gradient",
    "winding_gradients_at_sources",
    "estimate_areas",
]

# Singularity guard on the query-source distance.  Pairs closer than this
# are skipped and counted rather than poisoning the sum.
EPS_R = 1e-10

FOUR_PI = 4.0 * np.pi

_CHUNK = 256  # queries per block in batch evaluations (bounds memory)


@dataclass
class Diagnostics:
    """Counters surfaced to the run report."""

    skipped_pairs: int = 0
    degenerate_neighborhoods: int = 0


def poisson_kernel(q, p, n) -> float:
    """Dipole kernel value <n, p - q> / (4 pi r^3)."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    d = p - q
    r = np.linalg.norm(d)
    if r < EPS_R:
        raise SingularPair(f"query-source distance {r} below {EPS_R}")
    return float(n @ d / (FOUR_PI * r**3))


def kernel_gradient(q, p, n) -> np.ndarray:
    """Gradient of ``poisson_kernel`` with respect to the query point:
    (1/4pi) [ -n / r^3 + 3 <n, d> d / r^5 ],  d = p - q."""
    q = np.asarray(q, dtype=np.float64)
    p = np.asarray(p, dtype=np.float64)
    n = np.asarray(n, dtype=np.float64)
    d = p - q
    r = np.linalg.norm(d)
    if r < EPS_R:
        raise SingularPair(f"query-source distance {r} below {EPS_R}")
    return (-n / r**3 + 3.0 * (n @ d) * d / r**5) / FOUR_PI


def _cloud_arrays(cloud: PointCloud, normals: NormalField):
    if cloud.areas is None:
        raise ValueError("cloud has no area weights; run estimate_areas first")
    if len(normals) != cloud.n:
        raise ValueError("normal field length does not match cloud")
    return cloud.points, normals.vectors, cloud.areas


def winding_number(
    cloud: PointCloud,
    normals: NormalField,
    q,
    exclude: int | None = None,
    diagnostics: Diagnostics | None = None,
) -> float:
    """Field value at a single query point."""
    points, nvec, areas = _cloud_arrays(cloud, normals)
    d = points - np.asarray(q, dtype=np.float64)
    r = np.linalg.norm(d, axis=1)
    keep = r >= EPS_R
    if exclude is not None:
        keep[exclude] = False
        skipped = int(np.count_nonzero(~keep)) - 1
    else:
        skipped = int(np.count_nonzero(~keep))
    if diagnostics is not None:
        diagnostics.skipped_pairs += max(skipped, 0)
    nd = np.einsum("ik,ik->i", nvec, d)
    terms = np.where(keep, areas * nd / (FOUR_PI * np.where(keep, r, 1.0) ** 3), 0.0)
    return float(terms.sum())


def _pair_r2(queries: np.ndarray, points: np.ndarray, p2: np.ndarray) -> np.ndarray:
    """Squared query-source distances as |q|^2 + |p|^2 - 2 q.p (all GEMM)."""
    r2 = np.einsum("qk,qk->q", queries, queries)[:, None] + p2[None, :]
    r2 -= 2.0 * (queries @ points.T)
    np.maximum(r2, 0.0, out=r2)
    return r2


def winding_numbers(
    points: np.ndarray,
    nvec: np.ndarray,
    areas: np.ndarray,
    queries: np.ndarray,
    diagnostics: Diagnostics | None = None,
) -> np.ndarray:
    """Field values at many query points (chunked over queries)."""
    queries = np.asarray(queries, dtype=np.float64)
    p2 = np.einsum("ik,ik->i", points, points)
    np_dot = np.einsum("ik,ik->i", nvec, points)
    out = np.empty(len(queries))
    skipped = 0
    for s in range(0, len(queries), _CHUNK):
        qb = queries[s : s + _CHUNK]
        r2 = _pair_r2(qb, points, p2)
        bad = r2 < EPS_R * EPS_R
        skipped += int(np.count_nonzero(bad))
        r2[bad] = 1.0
        inv_r3 = r2 ** (-1.5)
        inv_r3[bad] = 0.0
        nd = np_dot[None, :] - qb @ nvec.T  # <n_i, p_i - q>
        out[s : s + _CHUNK] = (nd * inv_r3) @ areas / FOUR_PI
    if diagnostics is not None:
        diagnostics.skipped_pairs += skipped
    return out


def winding_gradient(
    cloud: PointCloud,
    normals: NormalField,
    q,
    exclude: int | None = None,
    diagnostics: Diagnostics | None = None,
) -> np.ndarray:
    """Spatial gradient of the field at a single query point, summing
    area-weighted ``kernel_gradient`` terms."""
    points, nvec, areas = _cloud_arrays(cloud, normals)
    d = points - np.asarray(q, dtype=np.float64)
    r = np.linalg.norm(d, axis=1)
    keep = r >= EPS_R
    if exclude is not None:
        keep[exclude] = False
        skipped = int(np.count_nonzero(~keep)) - 1
    else:
        skipped = int(np.count_nonzero(~keep))
    if diagnostics is not None:
        diagnostics.skipped_pairs += max(skipped, 0)
    r = np.where(keep, r, 1.0)
    nd = np.einsum("ik,ik->i", nvec, d)
    w = np.where(keep, areas, 0.0)
    grad = (
        -(w / r**3) @ nvec + np.einsum("i,ik->k", 3.0 * w * nd / r**5, d)
    ) / FOUR_PI
    return grad


def winding_gradients_at_sources(
    points: np.ndarray,
    nvec: np.ndarray,
    areas: np.ndarray,
    min_distance: float = 0.0,
) -> np.ndarray:
    """Gradient of the field evaluated at every source point p_i, with the
    self term excluded.  Returns an (n, 3) array; chunked over queries.

    ``min_distance`` additionally excludes sources closer than that to the
    query.  On-surface evaluation needs this: the raw sum diverges like
    1/d for a pair at distance d, so near-coincident samples would swamp
    the field gradient with two-point noise, while the continuous normal
    derivative being approximated is finite.
    """
    n = len(points)
    cut2 = max(min_distance, EPS_R) ** 2
    p2 = np.einsum("ik,ik->i", points, points)
    np_dot = np.einsum("ik,ik->i", nvec, points)
    out = np.empty((n, 3))
    for s in range(0, n, _CHUNK):
        qb = points[s : s + _CHUNK]
        r2 = _pair_r2(qb, points, p2)
        for row, i in enumerate(range(s, min(s + _CHUNK, n))):
            r2[row, i] = np.inf
        r2[r2 < cut2] = np.inf
        inv_r3 = r2 ** (-1.5)
        inv_r5 = inv_r3 / r2
        nd = np_dot[None, :] - qb @ nvec.T  # <n_j, p_j - q>
        # sum_j s_qj (p_j - q) decomposes into s @ p - rowsum(s) q
        s3 = 3.0 * areas * nd * inv_r5
        out[s : s + _CHUNK] = (
            -(areas * inv_r3) @ nvec
            + s3 @ points
            - s3.sum(axis=1)[:, None] * qb
        ) / FOUR_PI
    return out


# ---------------------------------------------------------------------------
# Area weights


def _clip_halfplane(poly, mid, direction):
    """Keep the part of a convex 2D polygon with (x - mid) . direction <= 0."""
    out = []
    prev = poly[-1]
    sp = (prev[0] - mid[0]) * direction[0] + (prev[1] - mid[1]) * direction[1]
    for cur in poly:
        sc = (cur[0] - mid[0]) * direction[0] + (cur[1] - mid[1]) * direction[1]
        if sc <= 0.0:
            if sp > 0.0:
                t = sp / (sp - sc)
                out.append(
                    (prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1]))
                )
            out.append(cur)
        elif sp <= 0.0:
            t = sp / (sp - sc)
            out.append(
                (prev[0] + t * (cur[0] - prev[0]), prev[1] + t * (cur[1] - prev[1]))
            )
        prev, sp = cur, sc
    return out


def _polygon_area(poly) -> float:
    a = 0.0
    m = len(poly)
    for i in range(m):
        x0, y0 = poly[i]
        x1, y1 = poly[(i + 1) % m]
        a += x0 * y1 - x1 * y0
    return 0.5 * abs(a)


def estimate_areas(
    cloud: PointCloud,
    k: int = 15,
    diagnostics: Diagnostics | None = None,
) -> np.ndarray:
    """Per-point surface-area weights.

    For each point: fit a tangent plane to the point and its k nearest
    neighbors (least principal axis of their covariance), project all k+1
    points onto it, and take the area of the point's 2D Voronoi cell among
    the projections, clipped to the projections' bounding square enlarged
    by 1.5x so boundary cells stay finite.  Collinear neighborhoods fall
    back to (mean neighbor distance)^2 and are counted in diagnostics.
    """
    points = cloud.points
    n = cloud.n
    if not (n > k >= 3):
        raise ValueError(f"need n > k >= 3, got n={n}, k={k}")
    tree = cKDTree(points)
    _, idx = tree.query(points, k=k + 1)
    # gather neighborhoods: (n, k+1, 3), column 0 is the point itself
    hoods = points[idx]
    centroids = hoods.mean(axis=1, keepdims=True)
    centered = hoods - centroids
    covs = np.einsum("nki,nkj->nij", centered, centered) / (k + 1)
    eigvals, eigvecs = np.linalg.eigh(covs)

    areas = np.empty(n)
    for i in range(n):
        if eigvals[i, 1] <= 1e-12 * max(eigvals[i, 2], 1e-300):
            # collinear neighborhood: positive proxy, flagged
            dists = np.linalg.norm(hoods[i, 1:] - points[i], axis=1)
            areas[i] = float(np.mean(dists)) ** 2
            if diagnostics is not None:
                diagnostics.degenerate_neighborhoods += 1
            continue
        t1 = eigvecs[i, :, 2]
        t2 = eigvecs[i, :, 1]
        px = centered[i] @ t1
        py = centered[i] @ t2
        # clip square: bounding box of the projections, squared up, x1.5
        cx = (px.max() + px.min()) / 2.0
        cy = (py.max() + py.min()) / 2.0
        half = 0.75 * max(px.max() - px.min(), py.max() - py.min())
        poly = [
            (cx - half, cy - half),
            (cx + half, cy - half),
            (cx + half, cy + half),
            (cx - half, cy + half),
        ]
        x0, y0 = px[0], py[0]
        for j in range(1, k + 1):
            dx, dy = px[j] - x0, py[j] - y0
            poly = _clip_halfplane(poly, ((x0 + px[j]) / 2.0, (y0 + py[j]) / 2.0), (dx, dy))
            if not poly:
                break
        area = _polygon_area(poly) if len(poly) >= 3 else 0.0
        if area <= 0.0:
            dists = np.linalg.norm(hoods[i, 1:] - points[i], axis=1)
            area = float(np.mean(dists)) ** 2
            if diagnostics is not None:
                diagnostics.degenerate_neighborhoods += 1
        areas[i] = area
    return areas
