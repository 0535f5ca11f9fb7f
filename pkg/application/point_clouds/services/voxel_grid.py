import logging
from typing import Optional

import numpy as np

from application.point_clouds.exceptions import InvalidVoxelSizeError
from application.point_clouds.models import PointCloud

logger = logging.getLogger(__name__)


def voxel_keys(points: np.ndarray, voxel_size: float, origin: np.ndarray) -> np.ndarray:
    return np.floor((points - origin) / voxel_size).astype(np.int64)


def voxel_downsample(
    cloud: PointCloud, voxel_size: float, origin: Optional[np.ndarray] = None
) -> PointCloud:
    """
    Одна точка на непустой воксель - центроид его точек.

    Сетка привязана к началу координат (или к явному origin), поэтому повторное
    прореживание тем же шагом ничего не меняет. Каналы усредняются,
    нормали перенормируются. Порядок выхода - лексикографический по ключу вокселя.
    """
    if not voxel_size > 0.0:
        raise InvalidVoxelSizeError(details={"voxel_size": voxel_size})
    if len(cloud) == 0:
        return cloud

    origin = np.zeros(3) if origin is None else np.asarray(origin, dtype=np.float64)
    keys = voxel_keys(cloud.points, voxel_size, origin)
    _, first_member, inverse, counts = np.unique(
        keys, axis=0, return_index=True, return_inverse=True, return_counts=True
    )
    inverse = inverse.reshape(-1)
    voxels = len(counts)

    def average(values: np.ndarray) -> np.ndarray:
        if values.ndim == 1:
            return np.bincount(inverse, weights=values, minlength=voxels) / counts
        sums = np.zeros((voxels, values.shape[1]))
        np.add.at(sums, inverse, values)
        return sums / counts[:, None]

    points = average(cloud.points)

    normals = None
    if cloud.normals is not None:
        normals = average(cloud.normals)
        lengths = np.linalg.norm(normals, axis=1)
        # Взаимно противоположные нормали гасят друг друга - берем нормаль первой точки
        cancelled = lengths < 1e-12
        if np.any(cancelled):
            normals[cancelled] = cloud.normals[first_member[cancelled]]
            lengths[cancelled] = 1.0
        normals = normals / lengths[:, None]

    variations = average(cloud.variations) if cloud.variations is not None else None
    confidences = (
        average(cloud.confidences) if cloud.confidences is not None else None
    )

    result = PointCloud(
        points=points,
        normals=normals,
        variations=variations,
        confidences=confidences,
    )
    logger.debug(
        "Voxel downsampling done",
        extra={
            "voxel_size": voxel_size,
            "input_points": len(cloud),
            "output_points": len(result),
        },
    )
    return result
