import json

import numpy as np
import pytest

from application.benchmark.models import CorruptionSpec, PerturbationMode
from application.benchmark.services import (
    corrupt,
    error_metric,
    random_perturbation,
    rotation_error,
    translation_error,
)
from application.point_clouds.models import PointCloud
from application.point_clouds.services import annotate_cloud
from application.registration.exceptions import (
    DegenerateTargetError,
    EmptyCorrespondenceError,
    RegistrationError,
)
from application.registration.models import (
    CorrespondenceMatrix,
    EmConfig,
    ModelConfig,
    RigidTransform,
)
from application.registration.services import Registrar, register
from application.registration.services import registrar as registrar_module
from tests.factories import plane_hemisphere, rotation_about


@pytest.fixture
def rotated_scene(annotated_scene):
    """source = target, повернутый на 20° вокруг наклонной оси; истина - обратный поворот"""
    g = rotation_about([1.0, 1.0, 0.3], np.radians(20.0))
    source = PointCloud(points=g.apply(annotated_scene.points))
    return source, annotated_scene, g.inverse()


class TestRegistrar:
    def test_self_registration_stays_at_identity(self, annotated_scene):
        source = PointCloud(points=annotated_scene.points)
        report = Registrar().register(source, annotated_scene)

        assert report.converged
        assert report.transform.rotation_angle() < 1e-6
        assert np.linalg.norm(report.transform.translation) < 1e-6

    def test_recovers_moderate_rotation(self, rotated_scene):
        source, target, truth = rotated_scene
        report = register(source, target)

        assert report.converged
        assert error_metric(source, report.transform, truth) < 1e-3 * target.diameter()
        assert len(report.nll_trace) == report.iterations + 1
        assert len(report.sigma2_trace) == report.iterations + 1

    def test_annotates_bare_target(self, rotated_scene):
        source, target, truth = rotated_scene
        report = register(source, PointCloud(points=target.points))
        assert error_metric(source, report.transform, truth) < 1e-3 * target.diameter()

    def test_nll_is_non_increasing(self, rotated_scene):
        source, target, _ = rotated_scene
        trace = np.array(register(source, target).nll_trace)
        assert np.all(np.diff(trace) <= 1e-6 * np.abs(trace[:-1]))

    def test_outliers_on_both_clouds_stay_near_clean_fit(self, rotated_scene):
        source, target, truth = rotated_scene
        clean = register(source, target)

        spec = CorruptionSpec(outlier_ratio=0.5, seed=11)
        report = register(
            corrupt(source, spec),
            corrupt(target, spec.model_copy(update={"seed": 12})),
            model_cfg=ModelConfig(outlier_ratio=0.5 / 1.5),
        )

        # Точная чистая подгонка дает почти нулевую ошибку, поэтому порог не ниже пола
        rotation_bound = max(3.0 * rotation_error(clean.transform, truth), 0.5)
        translation_bound = max(3.0 * translation_error(clean.transform, truth), 5e-3 * target.diameter())
        assert rotation_error(report.transform, truth) <= rotation_bound
        assert translation_error(report.transform, truth) <= translation_bound

    def test_is_deterministic(self, rotated_scene):
        source, target, _ = rotated_scene
        first = register(source, target)
        second = register(source, target)
        np.testing.assert_array_equal(first.transform.matrix(), second.transform.matrix())
        assert first.nll_trace == second.nll_trace
        assert first.iterations == second.iterations

    def test_rigid_conjugation(self, rotated_scene, rng):
        source, target, _ = rotated_scene
        h = RigidTransform(
            rotation=rotation_about(rng.normal(size=3), 1.1).rotation,
            translation=np.array([0.4, -1.2, 2.0]),
        )
        g = register(source, target).transform
        moved_target = annotate_cloud(PointCloud(points=h.apply(target.points)), k=20)
        g_moved = register(PointCloud(points=h.apply(source.points)), moved_target).transform

        expected = h.compose(g).compose(h.inverse())
        np.testing.assert_allclose(g_moved.matrix(), expected.matrix(), atol=1e-5)

    def test_initial_transform(self, rotated_scene):
        source, target, truth = rotated_scene
        from_identity = register(source, target)
        from_truth = register(source, target, initial=truth)

        assert from_truth.converged
        assert from_truth.iterations <= from_identity.iterations
        assert error_metric(source, from_truth.transform, truth) < 1e-3 * target.diameter()

    def test_max_iterations(self, rotated_scene):
        source, target, _ = rotated_scene
        report = register(source, target, em_cfg=EmConfig(max_iterations=1))
        assert not report.converged
        assert report.stop_reason == "max_iterations"
        assert report.iterations == 1

    def test_stop_rule(self, rotated_scene):
        source, target, _ = rotated_scene
        seen = []

        def rule(g: RigidTransform) -> bool:
            seen.append(g)
            return True

        report = register(source, target, em_cfg=EmConfig(stop_rule=rule))
        assert report.converged
        assert report.stop_reason == "stop_rule"
        assert report.iterations == 1
        np.testing.assert_array_equal(seen[0].matrix(), report.transform.matrix())

    def test_keeps_correspondence(self, rotated_scene):
        source, target, _ = rotated_scene
        report = register(
            source, target, em_cfg=EmConfig(max_iterations=2), keep_correspondence=True
        )
        assert report.correspondence.P.shape == (len(target), len(source))
        assert report.model_dump().get("correspondence") is None

    def test_report_text(self, rotated_scene):
        source, target, _ = rotated_scene
        report = register(source, target, em_cfg=EmConfig(max_iterations=3))
        lines = report.to_text().strip().splitlines()

        payload = json.loads("\n".join(lines[:-4]))
        assert payload["iterations"] == report.iterations
        assert payload["stop_reason"] == report.stop_reason
        assert payload["nll_trace"] == report.nll_trace
        parsed = RigidTransform.from_text("\n".join(lines[-4:]))
        np.testing.assert_array_equal(parsed.matrix(), report.transform.matrix())

    def test_outlier_ratio_sets_weight(self, rotated_scene):
        source, target, _ = rotated_scene
        report = register(
            source,
            target,
            model_cfg=ModelConfig(outlier_ratio=0.2),
            em_cfg=EmConfig(max_iterations=2),
        )
        assert 0.0 < report.w0 < 1.0

    def test_too_few_source_points(self, annotated_scene):
        with pytest.raises(RegistrationError) as exc_info:
            register(PointCloud(points=np.zeros((2, 3))), annotated_scene)
        assert exc_info.value.code == "too_few_points"

    def test_collinear_target(self):
        line = np.column_stack([np.linspace(0.0, 1.0, 50), np.zeros(50), np.zeros(50)])
        target = PointCloud(
            points=line,
            normals=np.tile([0.0, 0.0, 1.0], (50, 1)),
            variations=np.full(50, 0.1),
        )
        with pytest.raises(DegenerateTargetError):
            register(PointCloud(points=line + 0.01), target)

    def test_vanished_correspondence(self, rotated_scene, monkeypatch):
        source, target, _ = rotated_scene

        def empty(model, cloud, transform, terms, pool):
            count = len(cloud)
            return CorrespondenceMatrix.from_posteriors(
                np.zeros((model.component_count, count)), np.ones(count)
            )

        monkeypatch.setattr(registrar_module, "correspondence", empty)
        with pytest.raises(EmptyCorrespondenceError):
            register(source, target)


@pytest.mark.slow
class TestRecovery:
    def test_large_rotations(self, rng):
        target = annotate_cloud(plane_hemisphere(rng, count=1000), k=20)
        tolerance = 1e-3 * target.diameter()
        recovered = 0
        for _ in range(30):
            perturbation = random_perturbation(PerturbationMode.LARGE, rng, angle_deg=50.0)
            source = PointCloud(points=perturbation.apply(target.points))
            report = register(source, target)
            recovered += error_metric(source, report.transform, perturbation.inverse()) < tolerance
        assert recovered >= 28

    def test_nll_monotone_on_random_instances(self, rng):
        for _ in range(50):
            target = annotate_cloud(plane_hemisphere(rng, count=200), k=12)
            perturbation = random_perturbation(PerturbationMode.SMALL, rng)
            noisy = perturbation.apply(target.points) + rng.normal(scale=0.005, size=(200, 3))
            trace = np.array(register(PointCloud(points=noisy), target).nll_trace)
            assert np.all(np.diff(trace) <= 1e-6 * np.abs(trace[:-1]))
