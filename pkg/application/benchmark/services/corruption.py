import logging

import numpy as np

from application.benchmark.models import CorruptionSpec, PerturbationMode
from application.point_clouds.models import PointCloud
from application.registration.models import RigidTransform
from application.registration.services import exp_twist

logger = logging.getLogger(__name__)

SMALL_ROTATION = 0.05  # рад по каждой оси
SMALL_TRANSLATION = 0.01  # м по каждой оси


def corrupt(cloud: PointCloud, spec: CorruptionSpec) -> PointCloud:
    """
    Шум на каждую исходную точку и ⌊ratio·N⌋ выбросов в конце облака.

    Выбросы - из изотропной по осям гауссианы, подогнанной к облаку
    (среднее = центроид, СКО = СКО по оси × outlier_scale). Каналы после
    искажения устаревают и отбрасываются.
    """
    if len(cloud) == 0 or (spec.outlier_ratio == 0.0 and spec.noise_std == 0.0):
        return cloud

    rng = np.random.default_rng(spec.seed)
    points = np.array(cloud.points)
    if spec.noise_std > 0.0:
        points = points + rng.normal(0.0, spec.noise_std, size=points.shape)

    count = int(np.floor(spec.outlier_ratio * len(cloud)))
    if count:
        outliers = rng.normal(
            cloud.points.mean(axis=0),
            cloud.points.std(axis=0) * spec.outlier_scale,
            size=(count, 3),
        )
        points = np.vstack([points, outliers])

    logger.debug(
        "Cloud corrupted",
        extra={
            "points": len(cloud),
            "outliers": count,
            "noise_std": spec.noise_std,
            "seed": spec.seed,
        },
    )
    return PointCloud(points=points)


def random_perturbation(
    mode: PerturbationMode, rng: np.random.Generator, angle_deg: float = 50.0
) -> RigidTransform:
    if mode == PerturbationMode.LARGE:
        axis = rng.normal(size=3)
        axis /= np.linalg.norm(axis)
        return exp_twist(np.concatenate([axis * np.radians(angle_deg), np.zeros(3)]))

    omega = rng.uniform(-SMALL_ROTATION, SMALL_ROTATION, size=3)
    translation = rng.uniform(-SMALL_TRANSLATION, SMALL_TRANSLATION, size=3)
    rotation = exp_twist(np.concatenate([omega, np.zeros(3)])).rotation
    return RigidTransform(rotation=rotation, translation=translation)
