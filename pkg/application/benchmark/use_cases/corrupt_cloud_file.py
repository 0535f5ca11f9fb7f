import logging
from pathlib import Path

from application.benchmark.models import CorruptionSpec
from application.benchmark.services import corrupt
from application.point_clouds.services import load_cloud, save_cloud

logger = logging.getLogger(__name__)


def corrupt_cloud_file(input_path: Path, output_path: Path, spec: CorruptionSpec) -> int:
    cloud = load_cloud(input_path)
    corrupted = corrupt(cloud, spec)
    save_cloud(corrupted, output_path)
    logger.info(
        "Corrupted cloud written",
        extra={
            "input": str(input_path),
            "output": str(output_path),
            "points": len(corrupted),
            "outlier_ratio": spec.outlier_ratio,
            "noise_std": spec.noise_std,
        },
    )
    return len(corrupted)
