"""End-to-end acceptance checks on analytic shapes.

Each test prints a single PASS/FAIL line for its criterion (visible with
``pytest -s`` or in the captured output).  The clean-sphere run is shared
between the orientation-quality and inside-out-decay criteria.
"""

import json

import numpy as np
import pytest
from scipy.spatial import cKDTree

from windnorm.cli import main as cli_main
from windnorm.core import NormalField, PointCloud, init_random_normals, normalize_cloud
from windnorm.energy import EnergyState, boundary_energy, energy_gradient
from windnorm.gwn import estimate_areas, winding_numbers
from windnorm.metrics import add_noise, angle_stats
from windnorm.optim import OptimConfig, orient
from windnorm.shapes import ShapeSpec, generate_shape, sphere_classifier
from windnorm.voronoi import _neighbor_lists, build_diagram, select_all_samples

DELTA = 0.05


def verdict(name: str, ok: bool, detail: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
    assert ok, f"{name}: {detail}"


@pytest.fixture(scope="module")
def clean_sphere_run():
    cloud, gt = generate_shape(ShapeSpec("sphere", 2000, seed=0))
    result = orient(cloud, OptimConfig(seed=0), classifier=sphere_classifier())
    return result, gt


class TestOrientationQuality:
    def test_sphere_clean(self, clean_sphere_run):
        result, gt = clean_sphere_run
        stats = angle_stats(result.normals, gt)
        ok = (
            stats.consistency_rate >= 0.99
            and stats.mean_deg <= 10.0
            and result.wallclock <= 300.0
        )
        verdict(
            "sphere clean",
            ok,
            f"consistency {stats.consistency_rate:.4f} (>=0.99), "
            f"mean {stats.mean_deg:.2f} deg (<=10), "
            f"wallclock {result.wallclock:.0f}s (<=300)",
        )

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_torus_clean(self, seed):
        cloud, gt = generate_shape(ShapeSpec("torus", 3000, seed=seed))
        normalized, _ = normalize_cloud(cloud)
        result = orient(normalized, OptimConfig(seed=seed, max_outer_iters=80))
        stats = angle_stats(result.normals, gt)
        verdict(
            f"torus clean seed {seed}",
            stats.consistency_rate >= 0.98,
            f"consistency {stats.consistency_rate:.4f} (>=0.98)",
        )

    @pytest.mark.parametrize("seed", [0, 1, 2])
    def test_sphere_noisy(self, seed):
        base, gt = generate_shape(ShapeSpec("sphere", 2000, seed=0))
        noisy = add_noise(base, 0.005, seed=seed)
        normalized, _ = normalize_cloud(noisy)
        result = orient(normalized, OptimConfig(seed=seed, max_outer_iters=80))
        stats = angle_stats(result.normals, gt)
        verdict(
            f"sphere noisy seed {seed}",
            stats.consistency_rate >= 0.95,
            f"consistency {stats.consistency_rate:.4f} (>=0.95)",
        )

    def test_inside_out_decay(self, clean_sphere_run):
        result, _ = clean_sphere_run
        trace = result.inside_out_trace
        zeros = [i for i, c in enumerate(trace) if c == 0]
        first = zeros[0] if zeros else None
        stays = first is not None and all(c == 0 for c in trace[first:])
        ok = first is not None and first + 1 <= 20 and stays
        verdict(
            "inside-out decay",
            ok,
            f"first zero at iteration {None if first is None else first + 1} "
            f"(<=20), stays zero: {stays}",
        )


class TestFieldSanity:
    def test_gwn_field(self):
        n = 10240
        cloud, gt = generate_shape(ShapeSpec("sphere", n, seed=0))
        areas = np.full(n, 4.0 * np.pi / n)  # exact uniform-sampling weights
        queries = np.array([[0.0, 0.0, 0.0], [0.0, 0.0, 10.0]])
        w = winding_numbers(cloud.points, gt, areas, queries)
        w_flip = winding_numbers(cloud.points, -gt, areas, queries)
        ok = (
            0.98 <= w[0] <= 1.02
            and -0.02 <= w[1] <= 0.02
            and bool((w_flip == -w).all())
        )
        verdict(
            "gwn field sanity",
            ok,
            f"w(origin)={w[0]:.4f} (in [0.98,1.02]), w(far)={w[1]:.2e} "
            f"(in [-0.02,0.02]), flip negates exactly: {bool((w_flip == -w).all())}",
        )

    def test_gradient_matches_finite_differences(self):
        n, h = 50, 1e-6
        rng = np.random.default_rng(0)
        cloud = PointCloud(rng.uniform(-1, 1, size=(n, 3)))
        cloud = cloud.with_areas(estimate_areas(cloud, k=15))
        diagram = build_diagram(cloud)

        worst = 0.0
        fields = 0
        for seed in range(20):
            normals = init_random_normals(n, 100 + seed)
            samples = select_all_samples(diagram, normals)
            state = EnergyState(cloud, normals, samples)
            state.refresh()
            wmag = np.abs(np.concatenate([state.w_plus, state.w_minus]))
            # skip fields probing the nonsmooth loci |w| ~ 0 or 1 + delta
            if wmag.min() < 1e-6 or np.abs(wmag - (1 + DELTA)).min() < 1e-6:
                continue
            fields += 1
            grad = energy_gradient(state, DELTA).ravel()
            x0 = state.normals.angles.ravel()
            for k in range(2 * n):
                reps = []
                for sgn in (+1.0, -1.0):
                    x = x0.copy()
                    x[k] += sgn * h
                    st = EnergyState(cloud, NormalField(x.reshape(-1, 2)), samples)
                    st.refresh()
                    reps.append(boundary_energy(st, DELTA))
                fd = (
                    (reps[0].data_term - reps[1].data_term)
                    + (reps[0].penalty_term - reps[1].penalty_term)
                ) / (2 * h)
                if abs(fd) > 1e-7:
                    worst = max(worst, abs(grad[k] - fd) / abs(fd))
                else:
                    assert abs(grad[k] - fd) < 1e-6
        ok = fields >= 18 and worst < 1e-5
        verdict(
            "gradient vs finite differences",
            ok,
            f"worst relative error {worst:.2e} (<1e-5) over {fields} fields",
        )

    def test_energy_contrast(self):
        cloud, gt = generate_shape(ShapeSpec("sphere", 2000, seed=0))
        cloud = cloud.with_areas(estimate_areas(cloud, 15))
        diagram = build_diagram(cloud)

        def data_term(field):
            samples = select_all_samples(diagram, field)
            state = EnergyState(cloud, field, samples)
            state.refresh()
            return boundary_energy(state, DELTA).data_term

        consistent = data_term(NormalField.from_vectors(gt))
        random_max = max(
            abs(data_term(init_random_normals(2000, seed))) for seed in range(10)
        )
        ratio = consistent / random_max
        # regression floor frozen from a measured ratio of ~8.4e2
        verdict(
            "energy contrast",
            consistent > 0 and ratio >= 500.0,
            f"consistent {consistent:.1f}, max random {random_max:.2e}, "
            f"ratio {ratio:.0f} (>=500)",
        )


class TestGeometryPrimitives:
    def test_voronoi_correctness(self):
        n = 200
        rng = np.random.default_rng(0)
        cloud = PointCloud(rng.uniform(-1, 1, size=(n, 3)))
        diagram = build_diagram(cloud)
        seeds = diagram.seeds
        tree = cKDTree(seeds)

        # brute-force equidistance audit of every off-box candidate vertex
        worst_gap = 0.0
        for i, (verts, on_box) in enumerate(zip(diagram.cells, diagram.on_box)):
            inner = verts[~on_box]
            if not len(inner):
                continue
            nearest, _ = tree.query(inner)
            own = np.linalg.norm(inner - seeds[i], axis=1)
            worst_gap = max(worst_gap, float((own - nearest).max()))

        # cell membership (pruned bisector half-spaces) vs exhaustive
        # nearest-seed search on random probes
        lo, hi = diagram.clip_box
        probes = rng.uniform(lo, hi, size=(100_000, 3))
        nearest_seed = np.argmin(
            ((probes[:, None, :] - seeds[None, :, :]) ** 2).sum(axis=2), axis=1
        )
        membership = np.full(len(probes), -1)
        multi = 0
        p2 = (seeds**2).sum(axis=1)
        for i, nbrs in enumerate(_neighbor_lists(seeds)):
            # q in cell i  <=>  q . (s_j - s_i) <= (|s_j|^2 - |s_i|^2) / 2
            a = seeds[nbrs] - seeds[i]
            b = (p2[nbrs] - p2[i]) / 2.0
            inside = (probes @ a.T <= b).all(axis=1)
            multi += int(np.count_nonzero(inside & (membership >= 0)))
            membership[inside] = i
        agreement = float(np.mean(membership == nearest_seed))
        ok = worst_gap <= 1e-9 and agreement == 1.0 and multi == 0
        verdict(
            "voronoi correctness",
            ok,
            f"worst equidistance gap {worst_gap:.1e} (<=1e-9), "
            f"membership agreement {agreement:.6f} (==1), overlaps {multi}",
        )

    def test_area_estimation(self):
        h = 0.05
        grid, _ = generate_shape(ShapeSpec("plane-grid", 2500, spacing=h))
        areas = estimate_areas(grid, k=15)
        x, y = grid.points[:, 0], grid.points[:, 1]
        margin = 2 * h + 1e-9
        interior = (
            (x >= x.min() + margin)
            & (x <= x.max() - margin)
            & (y >= y.min() + margin)
            & (y <= y.max() - margin)
        )
        grid_err = float(np.abs(areas[interior] - h * h).max() / (h * h))

        sphere, _ = generate_shape(ShapeSpec("sphere", 2000, seed=0))
        total = float(estimate_areas(sphere, k=15).sum())
        sphere_err = abs(total - 4.0 * np.pi) / (4.0 * np.pi)
        ok = grid_err <= 0.05 and sphere_err <= 0.10
        verdict(
            "area estimation",
            ok,
            f"grid interior max error {100 * grid_err:.2f}% (<=5%), "
            f"sphere total {total:.3f} vs 4pi, error {100 * sphere_err:.2f}% (<=10%)",
        )


class TestDeterminism:
    def test_cli_bit_identical(self, tmp_path):
        src = tmp_path / "sphere.xyz"
        assert (
            cli_main(
                ["synth", "--shape", "sphere", "--n", "300", "--seed", "0",
                 "--out", str(src)]
            )
            == 0
        )
        outputs = []
        for tag in ("a", "b"):
            ply = tmp_path / f"{tag}.ply"
            rep = tmp_path / f"{tag}.json"
            code = cli_main(
                ["orient", str(src), "--seed", "0", "--deterministic",
                 "--out", str(ply), "--report", str(rep)]
            )
            assert code in (0, 2)
            trace = json.loads(rep.read_text())["trace"]
            outputs.append((ply.read_bytes(), trace))
        ok = outputs[0][0] == outputs[1][0] and outputs[0][1] == outputs[1][1]
        verdict(
            "determinism",
            ok,
            f"ply bytes identical: {outputs[0][0] == outputs[1][0]}, "
            f"energy traces identical: {outputs[0][1] == outputs[1][1]}",
        )
