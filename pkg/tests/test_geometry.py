import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_rotation
from pdmc.geometry import (
    Camera,
    GeometryError,
    NoIntersectionError,
    NotVisibleError,
    Plane3D,
    PlaneFitError,
    RansacConfig,
    default_ransac_config,
    fit_plane_lsq,
    fit_plane_ransac,
    plane_depth_at,
    plane_to_spherical,
    project,
    spherical_to_plane,
    unproject,
)


def identity_camera(fx=100.0, fy=100.0, cx=32.0, cy=24.0) -> Camera:
    return Camera(fx, fy, cx, cy, np.eye(3), np.zeros(3))


def random_camera(rng) -> Camera:
    rot = random_rotation(rng)
    return Camera(
        fx=rng.uniform(50, 200),
        fy=rng.uniform(50, 200),
        cx=rng.uniform(10, 50),
        cy=rng.uniform(10, 50),
        rotation=rot,
        translation=rng.normal(size=3),
    )


class TestCamera:
    def test_rejects_non_orthonormal_rotation(self):
        bad = np.eye(3)
        bad[0, 1] = 1e-6
        with pytest.raises(GeometryError):
            Camera(100, 100, 0, 0, bad, np.zeros(3))

    def test_rejects_non_positive_focal(self):
        with pytest.raises(GeometryError):
            Camera(0.0, 100, 0, 0, np.eye(3), np.zeros(3))

    def test_center(self):
        rng = np.random.default_rng(0)
        cam = random_camera(rng)
        # projecting the center is undefined (z == 0); center + axis is ahead
        (u, v), z = project(cam.center + cam.axis, cam)
        assert z == pytest.approx(1.0)
        assert u == pytest.approx(cam.cx)
        assert v == pytest.approx(cam.cy)


class TestProjection:
    def test_principal_point_axis_ray(self):
        cam = identity_camera()
        pt = unproject((cam.cx, cam.cy), 2.5, cam)
        np.testing.assert_allclose(pt, [0, 0, 2.5], atol=1e-12)

    def test_world_origin_seen_from_behind(self):
        cam = Camera(1.0, 1.0, 10.0, 20.0, np.eye(3), np.array([0, 0, 1.0]))
        (u, v), z = project(np.zeros(3), cam)
        assert (u, v) == (10.0, 20.0)
        assert z == 1.0

    def test_behind_camera_raises(self):
        cam = identity_camera()
        with pytest.raises(NotVisibleError):
            project(np.array([0, 0, -1.0]), cam)

    def test_non_positive_depth_rejected(self):
        with pytest.raises(GeometryError):
            unproject((0, 0), 0.0, identity_camera())

    def test_project_unproject_inverse(self):
        cam = identity_camera()
        (u, v), z = project(unproject((11.0, 17.0), 3.0, cam), cam)
        assert abs(u - 11.0) < 1e-9 and abs(v - 17.0) < 1e-9 and abs(z - 3.0) < 1e-9

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 10_000), st.floats(0.1, 50.0),
           st.floats(-30.0, 90.0), st.floats(-30.0, 90.0))
    def test_round_trip_random_pose(self, seed, depth, px, py):
        rng = np.random.default_rng(seed)
        cam = random_camera(rng)
        (u, v), z = project(unproject((px, py), depth, cam), cam)
        assert abs(u - px) < 1e-9 * max(1, abs(px))
        assert abs(v - py) < 1e-9 * max(1, abs(py))
        assert abs(z - depth) < 1e-9 * depth


class TestPlaneFit:
    def test_three_points_horizontal(self):
        plane = fit_plane_lsq([[0, 0, 5], [1, 0, 5], [0, 1, 5]])
        np.testing.assert_allclose(plane.normal, [0, 0, 1], atol=1e-12)
        assert plane.offset == pytest.approx(5.0)

    def test_exact_recovery_of_random_plane(self):
        rng = np.random.default_rng(1)
        for _ in range(20):
            n = rng.normal(size=3)
            n /= np.linalg.norm(n)
            off = rng.uniform(-3, 3)
            expect = Plane3D.from_normal_offset(n, off)
            basis = np.linalg.svd(n.reshape(1, 3))[2][1:]
            coef = rng.normal(size=(30, 2))
            pts = off * n + coef @ basis
            got = fit_plane_lsq(pts)
            np.testing.assert_allclose(got.normal, expect.normal, atol=1e-9)
            assert got.offset == pytest.approx(expect.offset, abs=1e-9)

    def test_degenerate_collinear(self):
        pts = np.outer(np.arange(5.0), [1.0, 2.0, 3.0])
        with pytest.raises(PlaneFitError):
            fit_plane_lsq(pts)

    def test_two_points_rejected(self):
        with pytest.raises(PlaneFitError):
            fit_plane_lsq([[0, 0, 0], [1, 1, 1]])

    def test_rigid_invariance(self):
        rng = np.random.default_rng(2)
        pts = rng.normal(size=(40, 3))
        pts[:, 2] = 0.2 * pts[:, 0] - 0.1 * pts[:, 1] + 1.5 + 1e-3 * rng.normal(size=40)
        base = fit_plane_lsq(pts)
        rot = random_rotation(rng)
        shift = rng.normal(size=3)
        moved = fit_plane_lsq(pts @ rot.T + shift)
        # transform the base plane the same way and compare
        n2 = rot @ base.normal
        off2 = base.offset + n2 @ shift
        expect = Plane3D.from_normal_offset(n2, off2)
        np.testing.assert_allclose(moved.normal, expect.normal, atol=1e-9)
        assert moved.offset == pytest.approx(expect.offset, abs=1e-9)


class TestRansac:
    def _two_plane_points(self, rng, n=200, frac=0.8, sep=5.0):
        n_in = int(n * frac)
        basis = np.array([[1.0, 0, 0], [0, 1.0, 0]])
        inliers = np.array([0, 0, 1.0]) * 2.0 + rng.normal(size=(n_in, 2)) @ basis
        outliers = np.array([0, 0, 1.0]) * (2.0 + sep) \
            + rng.normal(size=(n - n_in, 2)) @ basis
        return np.concatenate([inliers, outliers]), n_in

    def test_noiseless_single_plane(self):
        rng = np.random.default_rng(3)
        pts = rng.normal(size=(50, 2)) @ np.array([[1.0, 0, 0], [0, 1.0, 0]]) \
            + np.array([0, 0, 4.0])
        cfg = RansacConfig(max_iterations=50, inlier_threshold=1e-6, rng_seed=5)
        plane, mask = fit_plane_ransac(pts, cfg)
        assert mask.all()
        np.testing.assert_allclose(plane.normal, [0, 0, 1], atol=1e-9)
        assert plane.offset == pytest.approx(4.0, abs=1e-9)

    def test_eighty_twenty_split(self):
        rng = np.random.default_rng(4)
        pts, n_in = self._two_plane_points(rng)
        cfg = RansacConfig(max_iterations=200, inlier_threshold=0.5,
                           min_inlier_fraction=0.5, rng_seed=1)
        plane, mask = fit_plane_ransac(pts, cfg)
        assert mask[:n_in].all()
        assert not mask[n_in:].any()
        assert mask.mean() == pytest.approx(0.8)
        np.testing.assert_allclose(plane.normal, [0, 0, 1], atol=1e-9)

    def test_deterministic_for_seed(self):
        rng = np.random.default_rng(5)
        pts, _ = self._two_plane_points(rng)
        cfg = default_ransac_config(1.0, 10.0, rng_seed=9)
        p1, m1 = fit_plane_ransac(pts, cfg)
        p2, m2 = fit_plane_ransac(pts, cfg)
        assert np.array_equal(p1.normal, p2.normal) and p1.offset == p2.offset
        assert np.array_equal(m1, m2)

    def test_no_consensus_raises(self):
        rng = np.random.default_rng(6)
        pts = rng.uniform(-1, 1, size=(60, 3))
        cfg = RansacConfig(max_iterations=20, inlier_threshold=1e-9,
                           min_inlier_fraction=0.5, rng_seed=0)
        with pytest.raises(PlaneFitError):
            fit_plane_ransac(pts, cfg)


class TestPlaneDepth:
    def test_fronto_parallel(self):
        cam = identity_camera()
        plane = Plane3D.from_normal_offset([0, 0, 1], 3.0)
        for pix in ((0, 0), (cam.cx, cam.cy), (63, 47)):
            assert plane_depth_at(plane, pix, cam) == pytest.approx(3.0)

    def test_parallel_ray_raises(self):
        cam = identity_camera()
        plane = Plane3D.from_normal_offset([0, 1, 0], 5.0)
        # the ray through the principal point runs inside z; normal (0,1,0)
        with pytest.raises(NoIntersectionError):
            plane_depth_at(plane, (cam.cx, cam.cy), cam)

    def test_matches_unprojected_samples(self):
        rng = np.random.default_rng(7)
        cam = identity_camera()
        plane = Plane3D.from_normal_offset([0.2, -0.1, 1.0], 4.0)
        for _ in range(50):
            pix = (rng.uniform(0, 64), rng.uniform(0, 48))
            z = plane_depth_at(plane, pix, cam)
            pt = unproject(pix, z, cam)
            assert abs(plane.normal @ pt - plane.offset) < 1e-9


class TestSpherical:
    def test_axis_plane(self):
        theta, phi, dist = plane_to_spherical(Plane3D.from_normal_offset([0, 0, 1], 2.0))
        assert theta == 0.0 and phi == 0.0 and dist == pytest.approx(2.0)

    def test_x_normal_endpoints(self):
        theta, phi, _ = plane_to_spherical(Plane3D.from_normal_offset([1, 0, 0], 1.0))
        assert theta == pytest.approx(np.pi / 2)
        assert phi == 0.0

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000))
    def test_round_trip(self, seed):
        rng = np.random.default_rng(seed)
        n = rng.normal(size=3)
        while np.linalg.norm(n) < 1e-3:
            n = rng.normal(size=3)
        plane = Plane3D.from_normal_offset(n, rng.uniform(-5, 5))
        cam = random_camera(rng)
        back = spherical_to_plane(*plane_to_spherical(plane, cam), cam)
        np.testing.assert_allclose(back.normal, plane.normal, atol=1e-9)
        assert back.offset == pytest.approx(plane.offset, abs=1e-9)

    def test_canonicalization_flips(self):
        p = Plane3D.from_normal_offset([0, 0, -1], -2.0)
        np.testing.assert_allclose(p.normal, [0, 0, 1])
        assert p.offset == pytest.approx(2.0)
