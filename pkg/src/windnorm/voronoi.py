"""Clipped 3D Voronoi cells and probe-pair selection.

Each seed's cell is the intersection of its bisector half-spaces with an
enlarged bounding box, so every cell is a bounded convex polytope.  The
cell's vertices (true Voronoi vertices plus clip-box intersections) are
the candidate locations for the exterior/interior probes p+ and p-.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import Delaunay, HalfspaceIntersection, QhullError, cKDTree

from .core import NormalField, PointCloud
from .errors import DuplicatePoints, EmptyCell, NumericalFailure

__all__ = [
    "VoronoiDiagram",
    "SamplePair",
    "SampleSet",
    "build_diagram",
    "select_samples",
    "select_all_samples",
    "dump_cells_csv",
]

# merge tolerance for near-coincident polytope vertices / equidistance audit
VERTEX_TOL = 1e-9


@dataclass
class VoronoiDiagram:
    """Per-seed candidate vertex lists of the clipped Voronoi cells."""

    seeds: np.ndarray  # (n, 3)
    cells: list  # list of (m_i, 3) arrays
    on_box: list  # list of (m_i,) bool arrays
    clip_box: tuple  # (lo, hi), each (3,)

    @property
    def n(self) -> int:
        return len(self.seeds)


@dataclass
class SamplePair:
    """Probe pair for one point: most and least aligned cell vertices."""

    plus: np.ndarray
    minus: np.ndarray
    plus_index: int
    minus_index: int


@dataclass
class SampleSet:
    """Vectorized probe pairs for the whole cloud."""

    plus: np.ndarray  # (n, 3)
    minus: np.ndarray  # (n, 3)
    plus_index: np.ndarray  # (n,)
    minus_index: np.ndarray  # (n,)

    def __len__(self) -> int:
        return len(self.plus)

    def pair(self, i: int) -> SamplePair:
        return SamplePair(
            self.plus[i], self.minus[i], int(self.plus_index[i]), int(self.minus_index[i])
        )


def _clip_box(points: np.ndarray, box_scale: float):
    lo, hi = points.min(axis=0), points.max(axis=0)
    center = (lo + hi) / 2.0
    half = (hi - lo) / 2.0
    # degenerate axes (planar/collinear input) get the dominant extent so
    # the clip box stays a 3D polytope
    hmax = half.max()
    if hmax <= 0.0:
        raise NumericalFailure("clip box has no extent")
    half = np.where(half < 1e-9 * hmax, hmax, half)
    half = half * box_scale
    return center - half, center + half


def _box_halfspaces(lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    hs = np.zeros((6, 4))
    for ax in range(3):
        hs[2 * ax, ax] = 1.0
        hs[2 * ax, 3] = -hi[ax]
        hs[2 * ax + 1, ax] = -1.0
        hs[2 * ax + 1, 3] = lo[ax]
    return hs


def _neighbor_lists(points: np.ndarray) -> list:
    n = len(points)
    everyone = [np.array([j for j in range(n) if j != i]) for i in range(n)]
    if n < 5:
        return everyone
    try:
        tri = Delaunay(points)
    except QhullError:
        return everyone
    indptr, indices = tri.vertex_neighbor_vertices
    return [indices[indptr[i] : indptr[i + 1]] for i in range(n)]


def _cell_vertices(points, i, neighbors, box_hs, lo, hi):
    seed = points[i]
    diff = points[neighbors] - seed
    norms = np.linalg.norm(diff, axis=1, keepdims=True)
    normals = diff / norms
    mids = (points[neighbors] + seed) / 2.0
    offsets = -np.einsum("jk,jk->j", normals, mids)
    hs = np.vstack([np.hstack([normals, offsets[:, None]]), box_hs])
    verts = HalfspaceIntersection(hs, seed.copy()).intersections
    # merge near-coincident vertices
    if len(verts) > 1:
        tree = cKDTree(verts)
        groups = tree.query_ball_point(verts, VERTEX_TOL)
        keep = [gi for gi, g in enumerate(groups) if min(g) == gi]
        verts = verts[keep]
    on_box = (
        (np.abs(verts - lo) < VERTEX_TOL) | (np.abs(verts - hi) < VERTEX_TOL)
    ).any(axis=1)
    return verts, on_box


def build_diagram(cloud: PointCloud, box_scale: float = 2.0) -> VoronoiDiagram:
    """Clipped Voronoi diagram with the cloud's points as seeds.

    Cells are built by intersecting bisector half-spaces (pruned to
    Delaunay neighbors) with the clip box; an equidistance audit against
    the nearest-seed search guards the pruning, rebuilding a cell against
    all seeds if it fails.
    """
    if box_scale <= 1.0:
        raise ValueError("box_scale must be > 1")
    points = cloud.points
    n = len(points)
    tree = cKDTree(points)
    dmin, _ = tree.query(points, k=2)
    if dmin[:, 1].min() <= 1e-12:
        raise DuplicatePoints("coincident seeds; merge duplicates first")
    lo, hi = _clip_box(points, box_scale)
    box_hs = _box_halfspaces(lo, hi)
    neighbor_lists = _neighbor_lists(points)
    everyone = None

    cells = []
    on_box_flags = []
    for i in range(n):
        try:
            verts, on_box = _cell_vertices(points, i, neighbor_lists[i], box_hs, lo, hi)
            ok = _audit_cell(verts, on_box, points[i], tree)
        except QhullError:
            ok = False
        if not ok and len(neighbor_lists[i]) < n - 1:
            # pruned neighbor set was insufficient; clip against all seeds
            if everyone is None:
                everyone = np.arange(n)
            nbrs = everyone[everyone != i]
            verts, on_box = _cell_vertices(points, i, nbrs, box_hs, lo, hi)
            ok = _audit_cell(verts, on_box, points[i], tree)
        if not ok:
            raise NumericalFailure(f"cell {i} failed the equidistance audit")
        if len(verts) < 4:
            raise NumericalFailure(f"cell {i} has fewer than 4 vertices")
        cells.append(verts)
        on_box_flags.append(on_box)
    return VoronoiDiagram(seeds=points, cells=cells, on_box=on_box_flags, clip_box=(lo, hi))


def _audit_cell(verts, on_box, seed, tree) -> bool:
    interior = ~on_box
    if not interior.any():
        return True
    v = verts[interior]
    nearest, _ = tree.query(v)
    own = np.linalg.norm(v - seed, axis=1)
    return bool(np.all(own - nearest <= VERTEX_TOL))


def select_samples(diagram: VoronoiDiagram, i: int, n_i: np.ndarray) -> SamplePair:
    """Pick the cell vertices most (p+) and least (p-) aligned with n_i.

    Alignment is the cosine of the angle between (vertex - seed) and n_i;
    vertices coincident with the seed are excluded; ties break toward the
    lowest candidate index.
    """
    cand = diagram.cells[i]
    rel = cand - diagram.seeds[i]
    dist = np.linalg.norm(rel, axis=1)
    usable = dist >= 1e-12
    if not usable.any():
        raise EmptyCell(f"cell {i} has no usable candidates")
    cosine = np.where(usable, rel @ n_i / np.where(usable, dist, 1.0), np.nan)
    plus = int(np.nanargmax(cosine))
    minus = int(np.nanargmin(cosine))
    return SamplePair(cand[plus].copy(), cand[minus].copy(), plus, minus)


def select_all_samples(diagram: VoronoiDiagram, normals: NormalField) -> SampleSet:
    nvec = normals.vectors
    n = diagram.n
    plus = np.empty((n, 3))
    minus = np.empty((n, 3))
    plus_idx = np.empty(n, dtype=np.int64)
    minus_idx = np.empty(n, dtype=np.int64)
    for i in range(n):
        pair = select_samples(diagram, i, nvec[i])
        plus[i] = pair.plus
        minus[i] = pair.minus
        plus_idx[i] = pair.plus_index
        minus_idx[i] = pair.minus_index
    return SampleSet(plus, minus, plus_idx, minus_idx)


def dump_cells_csv(diagram: VoronoiDiagram, path) -> None:
    """Debug dump: one row per candidate vertex."""
    with open(path, "w") as fh:
        fh.write("seed_index,x,y,z,on_clip_box\n")
        for i, (verts, flags) in enumerate(zip(diagram.cells, diagram.on_box)):
            for v, f in zip(verts, flags):
                fh.write(f"{i},{v[0]:.9f},{v[1]:.9f},{v[2]:.9f},{int(f)}\n")
