from application.point_clouds.services.cloud_io import load_cloud, save_cloud
from application.point_clouds.services.kd_index import KdIndex, build_index, knn
from application.point_clouds.services.surface_estimator import (
    SurfaceEstimator,
    annotate_cloud,
    estimate_local_surface,
    KAPPA_FLOOR,
)
from application.point_clouds.services.voxel_grid import voxel_downsample

__all__ = [
    "load_cloud",
    "save_cloud",
    "KdIndex",
    "build_index",
    "knn",
    "SurfaceEstimator",
    "annotate_cloud",
    "estimate_local_surface",
    "KAPPA_FLOOR",
    "voxel_downsample",
]
