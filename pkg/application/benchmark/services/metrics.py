import numpy as np

from application.point_clouds.models import PointCloud
from application.registration.models import RigidTransform


def error_metric(source: PointCloud, g: RigidTransform, g_gt: RigidTransform) -> float:
    """Средняя длина g(x_i) − g_gt(x_i) по точкам source"""
    if len(source) == 0:
        return 0.0
    displacement = g.apply(source.points) - g_gt.apply(source.points)
    return float(np.linalg.norm(displacement, axis=1).mean())


def rotation_error(g: RigidTransform, g_gt: RigidTransform) -> float:
    """
    Угол относительного поворота R_gtᵀR, градусы.

    Считается через atan2 по синусу и косинусу: arccos теряет точность у нуля.
    """
    return float(np.degrees(g_gt.inverse().compose(g).rotation_angle()))


def translation_error(g: RigidTransform, g_gt: RigidTransform) -> float:
    return float(np.linalg.norm(g.translation - g_gt.translation))
