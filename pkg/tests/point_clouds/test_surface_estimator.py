import numpy as np
import pytest

from application.point_clouds.exceptions import NeighborCountError
from application.point_clouds.models import MAX_VARIATION, PointCloud
from application.point_clouds.services import (
    KAPPA_FLOOR,
    SurfaceEstimator,
    annotate_cloud,
    build_index,
    estimate_local_surface,
)
from core.workers import WorkerPool
from tests.factories import noisy_plane, rotation_about


def planar_grid(size: int = 10) -> PointCloud:
    xs, ys = np.meshgrid(np.linspace(0.0, 1.0, size), np.linspace(0.0, 1.0, size))
    return PointCloud(points=np.column_stack([xs.ravel(), ys.ravel(), np.zeros(size * size)]))


def dense_variation(neighborhood: np.ndarray) -> float:
    centered = neighborhood - neighborhood.mean(axis=0)
    eigenvalues = np.linalg.eigh(centered.T @ centered / len(neighborhood))[0]
    return float(np.clip(eigenvalues[0] / eigenvalues.sum(), KAPPA_FLOOR, MAX_VARIATION))


class TestEstimateLocalSurface:
    def test_coplanar_points(self, rng):
        points = np.column_stack([rng.uniform(size=10), rng.uniform(size=10), np.zeros(10)])
        surface = estimate_local_surface(points, build_index(points), 0, k=10)
        assert abs(surface.normal[2]) == pytest.approx(1.0, abs=1e-12)
        assert surface.variation == pytest.approx(KAPPA_FLOOR, abs=1e-12)

    def test_isotropic_scatter(self):
        points = np.vstack([np.eye(3), -np.eye(3)])
        surface = estimate_local_surface(points, build_index(points), 0, k=6)
        assert surface.variation == pytest.approx(1.0 / 3.0, abs=1e-12)

    def test_sphere_cap_matches_dense_eigen(self, rng):
        directions = rng.normal(size=(50, 3))
        directions[:, 2] = np.abs(directions[:, 2]) + 2.0
        points = directions / np.linalg.norm(directions, axis=1, keepdims=True)
        index = build_index(points)

        for point_id in range(0, 50, 7):
            distances = np.linalg.norm(points - points[point_id], axis=1)
            neighborhood = points[np.argsort(distances)[:20]]
            surface = estimate_local_surface(points, index, point_id, k=20)
            assert surface.variation == pytest.approx(dense_variation(neighborhood), abs=1e-10)

    def test_coincident_neighbors_are_degenerate(self):
        points = np.zeros((5, 3))
        surface = estimate_local_surface(points, build_index(points), 0, k=3)
        assert surface.degenerate
        assert surface.variation == pytest.approx(MAX_VARIATION)

    def test_small_k(self):
        points = np.eye(3)
        with pytest.raises(NeighborCountError):
            estimate_local_surface(points, build_index(points), 0, k=2)


class TestAnnotateCloud:
    def test_planar_grid(self):
        annotated = annotate_cloud(planar_grid(), k=8)
        assert np.all(np.abs(annotated.normals[:, 2]) >= 1.0 - 1e-6)
        assert np.all(annotated.variations <= KAPPA_FLOOR + 1e-12)

    def test_file_normals_fix_the_sign(self):
        grid = planar_grid()
        flipped = grid.with_channels(normals=np.tile([0.0, 0.0, -1.0], (len(grid), 1)))
        annotated = annotate_cloud(flipped, k=8)
        assert np.all(np.einsum("ij,ij->i", annotated.normals, flipped.normals) >= 0.0)

    def test_trusted_normals_are_kept(self):
        grid = planar_grid()
        tilted = np.tile([0.0, 0.6, 0.8], (len(grid), 1))
        annotated = annotate_cloud(grid.with_channels(normals=tilted), k=8, trust_normals=True)
        np.testing.assert_allclose(annotated.normals, tilted)

    def test_noise_raises_mean_variation(self, rng):
        clean = annotate_cloud(noisy_plane(rng, 400, 0.0), k=20)
        noisy = annotate_cloud(noisy_plane(rng, 400, 0.1), k=20)
        assert noisy.variations.mean() > clean.variations.mean()

    def test_variation_invariant_under_rigid_motion(self, scene):
        g = rotation_about(np.array([1.0, 2.0, 3.0]), 0.7)
        moved = PointCloud(points=g.apply(scene.points) + np.array([0.3, -0.2, 1.0]))
        np.testing.assert_allclose(
            annotate_cloud(moved, k=15).variations,
            annotate_cloud(scene, k=15).variations,
            atol=1e-9,
        )

    def test_variations_in_range(self, annotated_scene):
        assert np.all(annotated_scene.variations >= KAPPA_FLOOR)
        assert np.all(annotated_scene.variations <= MAX_VARIATION)
        np.testing.assert_allclose(np.linalg.norm(annotated_scene.normals, axis=1), 1.0, atol=1e-9)

    def test_threads_do_not_change_result(self, scene):
        serial = SurfaceEstimator(k=12).annotate(scene)
        pool = WorkerPool(threads=4, chunk_size=64)
        try:
            parallel = SurfaceEstimator(k=12, pool=pool).annotate(scene)
        finally:
            pool.shutdown()
        np.testing.assert_allclose(parallel.variations, serial.variations, rtol=0.0, atol=1e-14)
        np.testing.assert_allclose(parallel.normals, serial.normals, rtol=0.0, atol=1e-14)

    def test_too_few_points(self):
        with pytest.raises(NeighborCountError):
            annotate_cloud(PointCloud(points=np.zeros((2, 3))))
