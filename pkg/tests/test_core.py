import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from windnorm.core import (
    CloudTransform,
    NormalField,
    PointCloud,
    angles_to_normal,
    init_random_normals,
    merge_duplicates,
    normal_jacobian,
    normalize_cloud,
)
from windnorm.errors import DegenerateCloud, DuplicatePoints


def random_points(n, seed=0, scale=1.0):
    rng = np.random.default_rng(seed)
    return rng.uniform(-scale, scale, size=(n, 3))


class TestPointCloud:
    def test_basic_construction(self):
        cloud = PointCloud(random_points(10))
        assert cloud.n == 10
        assert cloud.points.dtype == np.float64
        assert cloud.areas is None

    def test_too_few_points(self):
        with pytest.raises(DegenerateCloud):
            PointCloud(random_points(3))

    def test_min_points_override(self):
        cloud = PointCloud(random_points(2), min_points=2)
        assert cloud.n == 2

    def test_rejects_non_finite(self):
        pts = random_points(5)
        pts[2, 1] = np.nan
        with pytest.raises(ValueError):
            PointCloud(pts)

    def test_rejects_bad_shape(self):
        with pytest.raises(ValueError):
            PointCloud(np.zeros((5, 2)))

    def test_bbox(self):
        pts = np.array([[0.0, 0, 0], [1, 2, 3], [-1, 0, 1], [0.5, 0.5, 0.5]])
        lo, hi = PointCloud(pts).bbox
        assert np.array_equal(lo, [-1, 0, 0])
        assert np.array_equal(hi, [1, 2, 3])

    def test_areas_validation(self):
        pts = random_points(5)
        with pytest.raises(ValueError):
            PointCloud(pts, areas=np.zeros(5))  # not strictly positive
        with pytest.raises(ValueError):
            PointCloud(pts, areas=np.ones(4))  # wrong length
        cloud = PointCloud(pts, areas=np.ones(5))
        assert cloud.areas.shape == (5,)

    def test_with_areas(self):
        cloud = PointCloud(random_points(6))
        enriched = cloud.with_areas(np.full(6, 0.5))
        assert enriched.areas is not None
        assert cloud.areas is None


class TestNormalizeCloud:
    def test_centers_and_scales(self):
        pts = random_points(50, seed=1, scale=3.0) + np.array([10.0, -4.0, 2.0])
        out, transform = normalize_cloud(PointCloud(pts))
        lo, hi = out.bbox
        center = (lo + hi) / 2
        assert np.abs(center).max() < 1e-12
        assert abs(((hi - lo) / 2).max() - 1.0) < 1e-12

    def test_transform_roundtrip(self):
        pts = random_points(20, seed=2, scale=5.0) + 7.0
        out, transform = normalize_cloud(PointCloud(pts))
        back = transform.invert(out.points)
        assert np.abs(back - pts).max() < 1e-9

    def test_already_normalized_is_identity(self):
        pts = np.array(
            [[1.0, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1]]
        )
        out, transform = normalize_cloud(PointCloud(pts))
        assert transform.is_identity
        assert np.array_equal(out.points, pts)

    def test_degenerate_cloud(self):
        pts = np.tile([1.0, 2.0, 3.0], (5, 1))
        with pytest.raises(DegenerateCloud):
            normalize_cloud(PointCloud(pts))


class TestCloudTransform:
    def test_apply_invert(self):
        t = CloudTransform(scale=0.5, offset=np.array([1.0, -2.0, 0.0]))
        p = np.array([[3.0, 4.0, 5.0]])
        assert np.allclose(t.invert(t.apply(p)), p)

    def test_identity_flag(self):
        assert CloudTransform(1.0, np.zeros(3)).is_identity
        assert not CloudTransform(2.0, np.zeros(3)).is_identity


class TestAngleChart:
    def test_known_directions(self):
        # v = 0 is the north pole, v = pi/2 the equator
        assert np.allclose(angles_to_normal(0.0, 0.0), [0, 0, 1])
        assert np.allclose(angles_to_normal(0.0, np.pi), [0, 0, -1], atol=1e-15)
        assert np.allclose(angles_to_normal(0.0, np.pi / 2), [1, 0, 0], atol=1e-15)
        assert np.allclose(angles_to_normal(np.pi / 2, np.pi / 2), [0, 1, 0], atol=1e-15)

    @given(
        st.floats(-10, 10, allow_nan=False),
        st.floats(-10, 10, allow_nan=False),
    )
    def test_always_unit_length(self, u, v):
        n = angles_to_normal(u, v)
        assert abs(np.linalg.norm(n) - 1.0) < 1e-12

    @given(
        st.floats(-3, 3, allow_nan=False),
        st.floats(0.1, 3.0, allow_nan=False),
    )
    @settings(max_examples=50)
    def test_jacobian_matches_finite_differences(self, u, v):
        h = 1e-6
        dn_du, dn_dv = normal_jacobian(u, v)
        fd_u = (angles_to_normal(u + h, v) - angles_to_normal(u - h, v)) / (2 * h)
        fd_v = (angles_to_normal(u, v + h) - angles_to_normal(u, v - h)) / (2 * h)
        assert np.abs(dn_du - fd_u).max() < 1e-8
        assert np.abs(dn_dv - fd_v).max() < 1e-8

    def test_jacobian_vanishes_at_pole(self):
        dn_du, _ = normal_jacobian(1.3, 0.0)
        assert np.abs(dn_du).max() == 0.0


class TestNormalField:
    def test_vectors_shape_and_norm(self):
        field = init_random_normals(100, seed=0)
        vecs = field.vectors
        assert vecs.shape == (100, 3)
        assert np.abs(np.linalg.norm(vecs, axis=1) - 1.0).max() < 1e-12

    def test_from_vectors_roundtrip(self):
        rng = np.random.default_rng(5)
        vecs = rng.normal(size=(50, 3))
        vecs /= np.linalg.norm(vecs, axis=1, keepdims=True)
        back = NormalField.from_vectors(vecs).vectors
        assert np.abs(back - vecs).max() < 1e-12

    def test_from_vectors_normalizes(self):
        field = NormalField.from_vectors(np.array([[0.0, 0.0, 10.0]]))
        assert np.allclose(field.vectors, [[0, 0, 1]])

    def test_from_vectors_rejects_zero(self):
        with pytest.raises(ValueError):
            NormalField.from_vectors(np.zeros((3, 3)))

    def test_flipped(self):
        field = init_random_normals(30, seed=1)
        assert np.abs(field.flipped().vectors + field.vectors).max() < 1e-12

    def test_rejects_bad_angles(self):
        with pytest.raises(ValueError):
            NormalField(np.zeros((4, 3)))
        with pytest.raises(ValueError):
            NormalField(np.full((4, 2), np.inf))


class TestInitRandomNormals:
    def test_deterministic(self):
        a = init_random_normals(200, seed=42)
        b = init_random_normals(200, seed=42)
        assert np.array_equal(a.angles, b.angles)

    def test_seed_sensitivity(self):
        a = init_random_normals(200, seed=1)
        b = init_random_normals(200, seed=2)
        assert not np.array_equal(a.angles, b.angles)

    def test_roughly_uniform_on_sphere(self):
        # component means of area-uniform directions concentrate near zero
        vecs = init_random_normals(20000, seed=0).vectors
        assert np.abs(vecs.mean(axis=0)).max() < 0.02

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            init_random_normals(0, seed=0)


class TestMergeDuplicates:
    def test_no_duplicates_is_identity(self):
        pts = random_points(10, seed=3)
        unique, inverse = merge_duplicates(pts)
        assert np.array_equal(unique, pts)
        assert np.array_equal(inverse, np.arange(10))

    def test_merges_exact_duplicates(self):
        pts = random_points(6, seed=4)
        stacked = np.vstack([pts, pts[2]])
        unique, inverse = merge_duplicates(stacked)
        assert len(unique) == 6
        assert inverse[6] == inverse[2] == 2

    def test_survivor_is_lowest_index(self):
        pts = random_points(5, seed=5)
        stacked = np.vstack([pts[0][None, :], pts])
        unique, inverse = merge_duplicates(stacked)
        assert len(unique) == 5
        assert inverse[0] == 0 and inverse[1] == 0

    def test_chain_merging(self):
        base = random_points(4, seed=6)
        chain = np.array([[0, 0, 0], [0, 0, 5e-13], [0, 0, 1e-12]])
        stacked = np.vstack([base + 10.0, chain])
        unique, inverse = merge_duplicates(stacked)
        assert len(unique) == 5
        assert inverse[4] == inverse[5] == inverse[6]

    def test_too_few_survivors(self):
        pts = np.vstack([np.tile([0.0, 0, 0], (3, 1)), np.tile([1.0, 0, 0], (3, 1))])
        with pytest.raises(DuplicatePoints):
            merge_duplicates(pts)
