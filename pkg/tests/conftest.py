import numpy as np
import pytest

from application.point_clouds.models import PointCloud
from application.point_clouds.services import annotate_cloud
from tests.factories import plane_hemisphere


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240607)


@pytest.fixture
def scene(rng: np.random.Generator) -> PointCloud:
    return plane_hemisphere(rng, count=600)


@pytest.fixture
def annotated_scene(scene: PointCloud) -> PointCloud:
    return annotate_cloud(scene, k=20)
