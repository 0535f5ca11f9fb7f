import logging
from pathlib import Path

from application.point_clouds.services import (
    SurfaceEstimator,
    load_cloud,
    save_cloud,
    voxel_downsample,
)

logger = logging.getLogger(__name__)


def annotate_cloud_file(
    estimator: SurfaceEstimator,
    input_path: Path,
    output_path: Path,
    voxel_size: float = 0.0,
) -> int:
    """Читает облако, при необходимости прореживает, пишет нормали и κ"""
    cloud = load_cloud(input_path)
    if voxel_size > 0.0:
        cloud = voxel_downsample(cloud, voxel_size)
    annotated = estimator.annotate(cloud)
    save_cloud(annotated, output_path)

    logger.info(
        "Cloud annotated",
        extra={
            "input": str(input_path),
            "output": str(output_path),
            "points": len(annotated),
        },
    )
    return len(annotated)
