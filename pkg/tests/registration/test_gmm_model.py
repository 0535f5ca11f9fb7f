import numpy as np
import pytest

from application.point_clouds.models import MAX_VARIATION, PointCloud
from application.point_clouds.services import annotate_cloud
from application.registration.exceptions import (
    DegenerateTargetError,
    InvalidKappaError,
    TargetNotAnnotatedError,
    ZeroConfidenceError,
)
from application.registration.models import GmmModel, ModelConfig
from application.registration.services import (
    alpha_coefficient,
    apply_confidence_filter,
    build_model,
    component_normalizer,
    depth_confidence,
    estimate_outlier_weight,
    initial_sigma2,
    inverse_covariance,
    working_volume,
)
from tests.factories import noisy_plane, random_model, unit_vectors


def single_component(volume: float, alpha: float = 0.0, sigma2: float = 1.0) -> GmmModel:
    return GmmModel(
        centroids=np.zeros((1, 3)),
        normals=np.array([[0.0, 0.0, 1.0]]),
        alphas=np.array([alpha]),
        priors=np.ones(1),
        sigma2=sigma2,
        volume=volume,
        w0=0.0,
        outlier_weights=np.zeros(1),
        source_confidences=np.ones(1),
        source_indices=np.arange(1),
        target_indices=np.arange(1),
    )


def unit_cube() -> PointCloud:
    corners = np.array([[x, y, z] for x in (0.0, 1.0) for y in (0.0, 1.0) for z in (0.0, 1.0)])
    return PointCloud(points=corners)


class TestAlphaCoefficient:
    def test_isotropic_scatter_gives_zero(self):
        assert alpha_coefficient(1.0 / 3.0, 0.5, 50.0) == pytest.approx(0.0, abs=1e-12)

    def test_flat_patch_gives_alpha_max(self):
        assert alpha_coefficient(1e-12, 0.5, 50.0) == pytest.approx(50.0)

    def test_reference_value(self):
        assert alpha_coefficient(0.1, 0.5, 50.0) == pytest.approx(50.0 * np.tanh(1.75), rel=1e-14)
        assert alpha_coefficient(0.1, 0.5, 50.0) == pytest.approx(47.07, abs=5e-3)

    def test_matches_sigmoid_form(self, rng):
        kappa = rng.uniform(1e-3, 1.0 / 3.0, 100)
        exponent = np.exp(0.5 * (3.0 - 1.0 / kappa))
        expected = 50.0 * (1.0 - exponent) / (1.0 + exponent)
        np.testing.assert_allclose(
            alpha_coefficient(kappa, 0.5, 50.0), expected, rtol=1e-12, atol=1e-12
        )

    def test_monotone_in_kappa(self):
        alphas = alpha_coefficient(np.linspace(1e-4, 1.0 / 3.0, 200), 0.5, 50.0)
        assert np.all(np.diff(alphas) <= 0.0)

    @pytest.mark.parametrize("kappa", [0.0, -0.1])
    def test_non_positive_kappa(self, kappa):
        with pytest.raises(InvalidKappaError):
            alpha_coefficient(kappa, 0.5, 50.0)


class TestInverseCovariance:
    def test_isotropic(self):
        np.testing.assert_allclose(inverse_covariance(np.array([0.0, 1.0, 0.0]), 0.0, 2.0), np.eye(3) / 2.0)

    def test_axis_aligned(self):
        np.testing.assert_allclose(
            inverse_covariance(np.array([0.0, 0.0, 1.0]), 3.0, 1.0), np.diag([1.0, 1.0, 4.0])
        )

    def test_determinant_and_eigenvectors(self, rng):
        for normal in unit_vectors(rng, 10):
            alpha, sigma2 = rng.uniform(0.0, 50.0), rng.uniform(0.1, 3.0)
            matrix = inverse_covariance(normal, alpha, sigma2)
            assert np.linalg.det(matrix) == pytest.approx((1.0 + alpha) / sigma2**3, rel=1e-10)
            eigenvalues, eigenvectors = np.linalg.eigh(matrix)
            np.testing.assert_allclose(
                eigenvalues, [1.0 / sigma2, 1.0 / sigma2, (1.0 + alpha) / sigma2], rtol=1e-10
            )
            assert abs(eigenvectors[:, 2] @ normal) == pytest.approx(1.0, abs=1e-9)

    def test_sign_of_normal_does_not_matter(self, rng):
        normal = unit_vectors(rng, 1)[0]
        np.testing.assert_array_equal(
            inverse_covariance(normal, 7.0, 0.3), inverse_covariance(-normal, 7.0, 0.3)
        )


class TestComponentNormalizer:
    def test_standard_gaussian(self):
        assert component_normalizer(0.0, 1.0) == pytest.approx((2.0 * np.pi) ** -1.5)
        assert component_normalizer(0.0, 1.0) == pytest.approx(0.063494, abs=1e-6)

    def test_alpha_three_doubles(self):
        assert component_normalizer(3.0, 1.0) == pytest.approx(2.0 * (2.0 * np.pi) ** -1.5)

    def test_algebraic_identity(self, rng):
        for alpha, sigma2 in zip(rng.uniform(0.0, 50.0, 20), rng.uniform(0.01, 5.0, 20)):
            c = component_normalizer(alpha, sigma2)
            assert c * c * (2.0 * np.pi * sigma2) ** 3 == pytest.approx(1.0 + alpha, rel=1e-12)

    def test_density_integrates_to_one(self, rng):
        normal = unit_vectors(rng, 1)[0]
        alpha, sigma2 = 5.0, 0.5
        axis = np.linspace(-5.0, 5.0, 101)
        step = axis[1] - axis[0]
        grid = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
        mahalanobis = np.einsum("ni,ij,nj->n", grid, inverse_covariance(normal, alpha, sigma2), grid)
        integral = component_normalizer(alpha, sigma2) * np.exp(-0.5 * mahalanobis).sum() * step**3
        assert integral == pytest.approx(1.0, abs=1e-3)


class TestOutlierWeight:
    def test_zero_ratio(self, rng):
        assert estimate_outlier_weight(random_model(rng, 5, 5), 0.0) == 0.0

    def test_hand_computed_case(self):
        model = single_component(volume=(2.0 * np.pi) ** 1.5)
        assert estimate_outlier_weight(model, 0.5) == pytest.approx(0.5, abs=1e-15)

    def test_monotone_in_ratio_and_volume(self, rng):
        model = random_model(rng, 10, 10)
        etas = np.linspace(0.0, 0.99, 50)
        weights = [estimate_outlier_weight(model, eta) for eta in etas]
        assert np.all(np.diff(weights) >= 0.0)
        larger = model.model_copy(update={"volume": 10.0 * model.volume})
        assert estimate_outlier_weight(larger, 0.3) >= estimate_outlier_weight(model, 0.3)

    def test_approaches_one(self, rng):
        weight = estimate_outlier_weight(random_model(rng, 10, 10), 1.0 - 1e-9)
        assert 0.99 < weight < 1.0

    def test_closed_form(self, rng):
        model = random_model(rng, 8, 3, sigma2=0.7)
        mass = model.volume * np.sum(model.priors * component_normalizer(model.alphas, model.sigma2))
        eta = 0.3
        expected = eta * mass / ((1.0 - eta) + eta * mass)
        assert estimate_outlier_weight(model, eta) == pytest.approx(expected, rel=1e-12)

    def test_tiny_sigma_does_not_overflow(self, rng):
        model = random_model(rng, 10, 10, sigma2=1e-200)
        weight = estimate_outlier_weight(model, 0.5)
        assert np.isfinite(weight)
        assert weight < 1.0


class TestWorkingVolume:
    def test_unit_cube(self):
        assert working_volume(unit_cube(), 0.0) == pytest.approx(1.0)

    def test_unit_cube_with_margin(self):
        assert working_volume(unit_cube(), 0.1) == pytest.approx(1.728)

    def test_planar_cloud_is_finite(self, rng):
        volume = working_volume(noisy_plane(rng, 200, 0.0), 0.1)
        assert np.isfinite(volume)
        assert volume > 0.0

    def test_empty_cloud(self):
        with pytest.raises(DegenerateTargetError):
            working_volume(PointCloud.empty(), 0.1)


class TestInitialSigma2:
    def test_matches_pair_sum(self, rng):
        source, target = rng.normal(size=(30, 3)), rng.normal(loc=2.0, size=(20, 3))
        differences = source[None, :, :] - target[:, None, :]
        expected = np.sum(differences**2) / (3.0 * 30 * 20)
        assert initial_sigma2(source, target, 10**7, 3000, rng) == pytest.approx(expected, rel=1e-12)

    def test_subsampling_is_seeded(self, rng):
        source, target = rng.normal(size=(500, 3)), rng.normal(size=(400, 3))
        first = initial_sigma2(source, target, 1000, 100, np.random.default_rng(3))
        second = initial_sigma2(source, target, 1000, 100, np.random.default_rng(3))
        exact = initial_sigma2(source, target, 10**7, 100, np.random.default_rng(3))
        assert first == second
        assert first == pytest.approx(exact, rel=0.3)


class TestConfidenceFilter:
    def test_depth_error_model(self):
        config = ModelConfig()
        points = np.array([[0.0, 0.0, 0.5], [0.0, 0.0, 2.0], [0.0, 0.0, 0.1]])
        e_min = 0.0012 + 0.0019 * 0.25
        expected = [1.0, e_min / (0.0012 + 0.0019 * 4.0), 1.0]
        np.testing.assert_allclose(depth_confidence(points, config), expected)

    def test_unit_confidence_is_uniform(self, rng):
        model = random_model(rng, 6, 4, w0=0.1, uniform=True)
        target = PointCloud(points=model.centroids)
        filtered = apply_confidence_filter(
            model, PointCloud(points=rng.normal(size=(4, 3))), target, ModelConfig(),
            source_confidence=np.ones(4), target_confidence=np.ones(6),
        )
        np.testing.assert_allclose(filtered.priors, np.full(6, 1.0 / 6.0))
        np.testing.assert_allclose(filtered.outlier_weights, np.full(4, filtered.w0))

    def test_zero_confidence_source_is_outlier(self, rng):
        model = random_model(rng, 3, 3, w0=0.1, uniform=True)
        filtered = apply_confidence_filter(
            model, PointCloud(points=rng.normal(size=(3, 3))), PointCloud(points=model.centroids),
            ModelConfig(), source_confidence=np.array([1.0, 0.0, 0.5]), target_confidence=np.ones(3),
        )
        assert filtered.outlier_weights[1] == 1.0

    def test_priors_follow_confidence(self, rng):
        model = random_model(rng, 2, 2, uniform=True)
        filtered = apply_confidence_filter(
            model, PointCloud(points=rng.normal(size=(2, 3))), PointCloud(points=model.centroids),
            ModelConfig(), source_confidence=np.ones(2), target_confidence=np.array([1.0, 0.5]),
        )
        np.testing.assert_allclose(filtered.priors, [2.0 / 3.0, 1.0 / 3.0])

    def test_truncation(self, rng):
        model = random_model(rng, 4, 5, uniform=True)
        config = ModelConfig(confidence_truncation_threshold=0.5)
        filtered = apply_confidence_filter(
            model, PointCloud(points=rng.normal(size=(5, 3))), PointCloud(points=model.centroids),
            config,
            source_confidence=np.array([0.9, 0.1, 0.6, 0.4, 1.0]),
            target_confidence=np.array([0.2, 1.0, 0.7, 0.0]),
        )
        np.testing.assert_array_equal(filtered.source_indices, [0, 2, 4])
        np.testing.assert_array_equal(filtered.target_indices, [1, 2])

    def test_all_zero_confidence(self, rng):
        model = random_model(rng, 3, 3, uniform=True)
        with pytest.raises(ZeroConfidenceError):
            apply_confidence_filter(
                model, PointCloud(points=rng.normal(size=(3, 3))), PointCloud(points=model.centroids),
                ModelConfig(), source_confidence=np.ones(3), target_confidence=np.zeros(3),
            )


class TestBuildModel:
    def test_flat_target_gets_alpha_max(self, rng):
        target = annotate_cloud(noisy_plane(rng, 300, 0.0), k=10)
        model = build_model(target, noisy_plane(rng, 100, 0.0), ModelConfig())
        np.testing.assert_allclose(model.alphas, 50.0, atol=1e-6)
        np.testing.assert_allclose(model.priors, np.full(300, 1.0 / 300.0))
        assert model.w0 == 0.0

    def test_isotropic_target_gets_zero_alpha(self, rng):
        count = 50
        target = PointCloud(
            points=rng.normal(size=(count, 3)),
            normals=unit_vectors(rng, count),
            variations=np.full(count, MAX_VARIATION),
        )
        model = build_model(target, PointCloud(points=rng.normal(size=(10, 3))), ModelConfig())
        np.testing.assert_allclose(model.alphas, 0.0, atol=1e-12)

    def test_mean_alpha_decreases_with_noise(self, rng):
        source = noisy_plane(rng, 50, 0.0)
        means = []
        for noise in (0.0, 0.01, 0.02, 0.03):
            target = annotate_cloud(noisy_plane(rng, 1000, noise), k=20)
            means.append(build_model(target, source, ModelConfig()).mean_alpha)
        assert all(later < earlier for earlier, later in zip(means, means[1:]))

    def test_outlier_ratio_sets_weight(self, annotated_scene):
        model = build_model(annotated_scene, annotated_scene, ModelConfig(outlier_ratio=0.3))
        assert 0.0 < model.w0 < 1.0
        np.testing.assert_allclose(model.outlier_weights, model.w0)

    def test_cf_uses_cloud_confidences(self, rng, annotated_scene):
        confidences = rng.uniform(0.1, 1.0, len(annotated_scene))
        target = annotated_scene.with_channels(confidences=confidences)
        model = build_model(target, annotated_scene, ModelConfig(use_cf=True))
        np.testing.assert_allclose(model.priors, confidences / confidences.sum())

    def test_unannotated_target(self, scene):
        with pytest.raises(TargetNotAnnotatedError):
            build_model(scene, scene, ModelConfig())

    def test_collinear_target(self):
        points = np.column_stack([np.arange(10.0), np.zeros(10), np.zeros(10)])
        target = PointCloud(
            points=points,
            normals=np.tile([0.0, 0.0, 1.0], (10, 1)),
            variations=np.full(10, 0.1),
        )
        with pytest.raises(DegenerateTargetError):
            build_model(target, target, ModelConfig())

    def test_too_few_target_points(self):
        target = PointCloud(
            points=np.eye(3)[:2], normals=np.tile([0.0, 0.0, 1.0], (2, 1)), variations=np.full(2, 0.1)
        )
        with pytest.raises(DegenerateTargetError):
            build_model(target, target, ModelConfig())
