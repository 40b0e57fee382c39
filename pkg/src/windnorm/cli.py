"""Command-line front end: orient / synth / eval subcommands.

The report JSON (schema 1) is the machine-readable record of a run;
stdout is only a human-facing log.  Exit codes: 0 success/converged,
2 when the iteration budget ran out, 1 on any error.
"""

from __future__ import annotations

import argparse
import json
import resource
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from . import io
from .core import NormalField, PointCloud, merge_duplicates, normalize_cloud
from .errors import WindnormError
from .metrics import add_noise, angle_stats, chamfer_points
from .optim import OptimConfig, orient
from .shapes import ShapeSpec, generate_shape

SCHEMA_VERSION = 1


def _peak_memory_bytes() -> int:
    # ru_maxrss is kilobytes on Linux
    return resource.getrusage(resource.RUSAGE_SELF).ru_maxrss * 1024


def _read_gt_normals(path) -> np.ndarray:
    """Ground-truth normals from a 6-column file, or a bare 3-column file
    interpreted as normals."""
    pts, nrm = io.read_points(path)
    return nrm if nrm is not None else pts


def _write_report(path, report: dict) -> None:
    with open(path, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _write_histogram_csv(path, histogram) -> None:
    with open(path, "w") as fh:
        fh.write("bin_start_deg,count\n")
        for i, count in enumerate(histogram):
            fh.write(f"{i * 5.0:.1f},{int(count)}\n")


def cmd_orient(args) -> int:
    raw_points, _ = io.read_points(args.input)
    unique, inverse = merge_duplicates(raw_points)
    cloud = PointCloud(unique)
    if args.noise > 0:
        cloud = add_noise(cloud, args.noise, args.seed)
    normalized, transform = normalize_cloud(cloud)

    config = OptimConfig(
        max_outer_iters=args.max_iters,
        grad_tol=args.grad_tol,
        delta=args.delta,
        box_scale=args.box_scale,
        knn_k=args.knn,
        seed=args.seed,
        deterministic=args.deterministic,
    )
    result = orient(normalized, config)

    normals_unique = result.normals.vectors
    normals_full = normals_unique[inverse]
    out_points = transform.invert(normalized.points)[inverse]

    out_path = args.out or str(Path(args.input).with_suffix("")) + "_oriented.ply"
    io.write_ply(out_path, out_points, normals_full)

    lo, hi = cloud.bbox
    report = {
        "schema": SCHEMA_VERSION,
        "command": "orient",
        "config": {**asdict(config), "noise": args.noise, "input": str(args.input)},
        "input": {
            "n_raw": int(len(raw_points)),
            "n": int(cloud.n),
            "bbox_lo": lo.tolist(),
            "bbox_hi": hi.tolist(),
        },
        "converged": bool(result.converged),
        "iterations_run": int(result.iterations_run),
        "wallclock_seconds": result.wallclock,
        "peak_memory_bytes": _peak_memory_bytes(),
        "diagnostics": {
            "skipped_pairs": int(result.diagnostics.skipped_pairs),
            "degenerate_neighborhoods": int(result.diagnostics.degenerate_neighborhoods),
        },
        "trace": [
            {
                "iteration": rec.iteration,
                "total": rec.total,
                "data_term": rec.data_term,
                "penalty_term": rec.penalty_term,
                "grad_norm": rec.grad_norm,
                "inside_out": rec.inside_out,
            }
            for rec in result.energy_trace
        ],
        "output": {"ply": str(out_path)},
    }

    if args.gt_normals:
        gt = _read_gt_normals(args.gt_normals)
        stats = angle_stats(NormalField.from_vectors(normals_full), gt)
        report["angle_stats"] = stats.to_dict()

    report_path = args.report or str(Path(out_path).with_suffix(".json"))
    _write_report(report_path, report)
    report["output"]["report"] = str(report_path)
    if "angle_stats" in report:
        hist_path = str(Path(report_path).with_suffix(".hist.csv"))
        _write_histogram_csv(hist_path, report["angle_stats"]["histogram"])

    print(
        f"oriented {cloud.n} points in {result.iterations_run} iterations "
        f"({result.wallclock:.1f}s), converged={result.converged}"
    )
    print(f"wrote {out_path} and {report_path}")
    return 0 if result.converged else 2


def cmd_synth(args) -> int:
    spec = ShapeSpec(
        kind=args.shape,
        count=args.n,
        seed=args.seed,
        major_radius=args.R,
        minor_radius=args.r,
        spacing=args.spacing,
        gap=args.gap,
    )
    cloud, gt = generate_shape(spec)
    out_path = args.out or f"{args.shape}.xyz"
    io.write_xyz(out_path, cloud.points)
    gt_path = str(Path(out_path).with_suffix("")) + "_gt.xyz"
    io.write_xyz(gt_path, cloud.points, gt)
    print(f"wrote {cloud.n} points to {out_path}, ground truth to {gt_path}")
    return 0


def cmd_eval(args) -> int:
    pred_pts, pred_nrm = io.read_points(args.pred)
    gt_pts, gt_nrm = io.read_points(args.gt)
    report = {
        "schema": SCHEMA_VERSION,
        "command": "eval",
        "pred": str(args.pred),
        "gt": str(args.gt),
        "chamfer": chamfer_points(pred_pts, gt_pts),
    }
    if pred_nrm is not None and gt_nrm is not None:
        stats = angle_stats(NormalField.from_vectors(pred_nrm), gt_nrm)
        report["angle_stats"] = stats.to_dict()
    report_path = args.report or "eval_report.json"
    _write_report(report_path, report)
    if "angle_stats" in report:
        hist_path = str(Path(report_path).with_suffix(".hist.csv"))
        _write_histogram_csv(hist_path, report["angle_stats"]["histogram"])
    if "angle_stats" in report:
        print(
            f"mean angle {report['angle_stats']['mean_deg']:.2f} deg, "
            f"consistency {report['angle_stats']['consistency_rate']:.4f}"
        )
    print(f"chamfer {report['chamfer']:.6g}; wrote {report_path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="windnorm", description="Consistent normal orientation for point clouds."
    )
    sub = parser.add_subparsers(dest="command", required=True)
    defaults = OptimConfig()

    p_orient = sub.add_parser("orient", help="orient an unordered point cloud")
    p_orient.add_argument("input", help="XYZ or ASCII PLY point file")
    p_orient.add_argument("--seed", type=int, default=defaults.seed)
    p_orient.add_argument("--noise", type=float, default=0.0, help="bbox-diagonal fraction")
    p_orient.add_argument("--delta", type=float, default=defaults.delta)
    p_orient.add_argument("--box-scale", type=float, default=defaults.box_scale)
    p_orient.add_argument("--knn", type=int, default=defaults.knn_k)
    p_orient.add_argument("--max-iters", type=int, default=defaults.max_outer_iters)
    p_orient.add_argument("--grad-tol", type=float, default=defaults.grad_tol)
    p_orient.add_argument(
        "--deterministic",
        action=argparse.BooleanOptionalAction,
        default=defaults.deterministic,
    )
    p_orient.add_argument("--gt-normals", help="reference normals for angle stats")
    p_orient.add_argument("--out", help="output PLY path")
    p_orient.add_argument("--report", help="output report JSON path")
    p_orient.set_defaults(func=cmd_orient)

    p_synth = sub.add_parser("synth", help="generate an analytic test shape")
    p_synth.add_argument(
        "--shape", required=True, choices=["sphere", "torus", "plane-grid", "two-spheres"]
    )
    p_synth.add_argument("--n", type=int, required=True)
    p_synth.add_argument("--seed", type=int, default=0)
    p_synth.add_argument("--R", type=float, default=1.0, help="torus major radius")
    p_synth.add_argument("--r", type=float, default=0.3, help="torus minor radius")
    p_synth.add_argument("--spacing", type=float, default=0.02, help="plane-grid step")
    p_synth.add_argument("--gap", type=float, default=0.5, help="two-spheres separation")
    p_synth.add_argument("--out", help="output XYZ path")
    p_synth.set_defaults(func=cmd_synth)

    p_eval = sub.add_parser("eval", help="compare predicted vs reference clouds")
    p_eval.add_argument("pred")
    p_eval.add_argument("gt")
    p_eval.add_argument("--report", help="output report JSON path")
    p_eval.set_defaults(func=cmd_eval)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except WindnormError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
