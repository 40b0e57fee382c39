"""Readers and writers for XYZ and ASCII PLY point-cloud files.

Both formats are text-only for diffability; floats are written with 9
decimal digits so round trips stay within 1e-9.
"""

from __future__ import annotations

import numpy as np

from .errors import ParseError

__all__ = ["read_points", "read_xyz", "read_ply", "write_xyz", "write_ply"]

_FMT = "%.9f"


def read_points(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Dispatch on extension: .ply uses the PLY reader, everything else XYZ."""
    if str(path).lower().endswith(".ply"):
        return read_ply(path)
    return read_xyz(path)


def read_xyz(path) -> tuple[np.ndarray, np.ndarray | None]:
    """Whitespace-separated ``x y z`` rows, optionally with ``nx ny nz``."""
    points = []
    normals = []
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) not in (3, 6):
                raise ParseError(path, lineno, f"expected 3 or 6 columns, got {len(parts)}")
            try:
                vals = [float(p) for p in parts]
            except ValueError as exc:
                raise ParseError(path, lineno, str(exc)) from None
            points.append(vals[:3])
            if len(parts) == 6:
                normals.append(vals[3:])
    if not points:
        raise ParseError(path, 0, "no points found")
    pts = np.asarray(points, dtype=np.float64)
    if normals and len(normals) != len(points):
        raise ParseError(path, 0, "mixed 3- and 6-column rows")
    return pts, (np.asarray(normals, dtype=np.float64) if normals else None)


def read_ply(path) -> tuple[np.ndarray, np.ndarray | None]:
    """ASCII PLY with at least x, y, z vertex properties."""
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != "ply":
        raise ParseError(path, 1, "missing 'ply' magic")
    n_vertices = None
    props = []
    in_vertex = False
    body_start = None
    for lineno, line in enumerate(lines[1:], start=2):
        tok = line.split()
        if not tok:
            continue
        if tok[0] == "format":
            if tok[1] != "ascii":
                raise ParseError(path, lineno, "only ASCII PLY is supported")
        elif tok[0] == "element":
            in_vertex = tok[1] == "vertex"
            if in_vertex:
                n_vertices = int(tok[2])
        elif tok[0] == "property" and in_vertex:
            props.append(tok[-1])
        elif tok[0] == "end_header":
            body_start = lineno
            break
    if body_start is None or n_vertices is None:
        raise ParseError(path, 0, "incomplete PLY header")
    try:
        cols = {name: props.index(name) for name in ("x", "y", "z")}
    except ValueError:
        raise ParseError(path, 0, "vertex element lacks x/y/z properties") from None
    has_normals = all(name in props for name in ("nx", "ny", "nz"))
    rows = []
    for lineno in range(body_start, body_start + n_vertices):
        if lineno >= len(lines):
            raise ParseError(path, lineno + 1, "fewer vertex rows than declared")
        parts = lines[lineno].split()
        if len(parts) < len(props):
            raise ParseError(path, lineno + 1, f"expected {len(props)} columns")
        try:
            rows.append([float(p) for p in parts])
        except ValueError as exc:
            raise ParseError(path, lineno + 1, str(exc)) from None
    data = np.asarray(rows, dtype=np.float64)
    pts = data[:, [cols["x"], cols["y"], cols["z"]]]
    if has_normals:
        ncols = [props.index(n) for n in ("nx", "ny", "nz")]
        return pts, data[:, ncols]
    return pts, None


def write_xyz(path, points: np.ndarray, normals: np.ndarray | None = None) -> None:
    points = np.asarray(points, dtype=np.float64)
    with open(path, "w") as fh:
        for i in range(len(points)):
            row = [_FMT % v for v in points[i]]
            if normals is not None:
                row += [_FMT % v for v in normals[i]]
            fh.write(" ".join(row) + "\n")


def write_ply(path, points: np.ndarray, normals: np.ndarray | None = None) -> None:
    points = np.asarray(points, dtype=np.float64)
    with open(path, "w") as fh:
        fh.write("ply\nformat ascii 1.0\n")
        fh.write(f"element vertex {len(points)}\n")
        fh.write("property float x\nproperty float y\nproperty float z\n")
        if normals is not None:
            fh.write("property float nx\nproperty float ny\nproperty float nz\n")
        fh.write("end_header\n")
        for i in range(len(points)):
            row = [_FMT % v for v in points[i]]
            if normals is not None:
                row += [_FMT % v for v in normals[i]]
            fh.write(" ".join(row) + "\n")
