import logging
from pathlib import Path
from typing import Optional

from application.point_clouds.models import SurfaceConfig
from application.point_clouds.services import load_cloud, voxel_downsample
from application.registration.exceptions import RegistrationIOError
from application.registration.models import EmConfig, ModelConfig, RegistrationReport
from application.registration.services import (
    Registrar,
    dump_correspondence,
    load_transform,
    save_transform,
)

logger = logging.getLogger(__name__)


def register_clouds(
    registrar: Registrar,
    source_path: Path,
    target_path: Path,
    out_path: Path,
    model_cfg: ModelConfig,
    em_cfg: EmConfig,
    surface_cfg: SurfaceConfig,
    report_path: Optional[Path] = None,
    init_path: Optional[Path] = None,
    dump_p_path: Optional[Path] = None,
) -> RegistrationReport:
    """Регистрация пары файлов: преобразование в out_path, отчет рядом"""
    source = load_cloud(source_path)
    target = load_cloud(target_path)
    if surface_cfg.voxel_size > 0.0:
        source = voxel_downsample(source, surface_cfg.voxel_size)
        target = voxel_downsample(target, surface_cfg.voxel_size)

    initial = load_transform(init_path) if init_path is not None else None

    report = registrar.register(
        source,
        target,
        model_cfg=model_cfg,
        em_cfg=em_cfg,
        surface_cfg=surface_cfg,
        initial=initial,
        keep_correspondence=dump_p_path is not None,
        run_id=Path(out_path).stem,
    )

    save_transform(report.transform, out_path)
    report_path = report_path or Path(f"{out_path}.report.json")
    try:
        Path(report_path).write_text(report.to_text(), encoding="utf-8")
    except OSError as e:
        raise RegistrationIOError(message=f"Cannot write {report_path}: {e}") from e

    if dump_p_path is not None and report.correspondence is not None:
        dump_correspondence(report.correspondence, str(dump_p_path))
        logger.debug("Correspondence dumped", extra={"path": str(dump_p_path)})

    logger.info(
        "Registration written",
        extra={
            "out": str(out_path),
            "report": str(report_path),
            "converged": report.converged,
        },
    )
    return report
