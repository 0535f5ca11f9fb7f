import logging
from pathlib import Path
from typing import List

from application.benchmark.models import MetricRow, SweepConfig
from application.benchmark.services import SweepRunner, sweep_specs
from application.point_clouds.models import SurfaceConfig
from application.point_clouds.services import load_cloud, voxel_downsample
from application.registration.models import EmConfig, ModelConfig

logger = logging.getLogger(__name__)


def run_sweep_files(
    runner: SweepRunner,
    source_path: Path,
    target_path: Path,
    out_path: Path,
    sweep_cfg: SweepConfig,
    model_cfg: ModelConfig,
    em_cfg: EmConfig,
    surface_cfg: SurfaceConfig,
) -> List[MetricRow]:
    source = load_cloud(source_path)
    target = load_cloud(target_path)
    if surface_cfg.voxel_size > 0.0:
        source = voxel_downsample(source, surface_cfg.voxel_size)
        target = voxel_downsample(target, surface_cfg.voxel_size)

    specs = sweep_specs(sweep_cfg)
    logger.info(
        "Sweep started",
        extra={"specs": len(specs), "repeats": sweep_cfg.repeats, "out": str(out_path)},
    )
    return runner.run_sweep(
        source,
        target,
        specs,
        sweep_cfg.repeats,
        model_cfg,
        em_cfg,
        out=out_path,
        sweep_cfg=sweep_cfg,
        surface_cfg=surface_cfg,
    )
