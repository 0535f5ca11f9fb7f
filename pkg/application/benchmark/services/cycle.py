import logging

import numpy as np

from application.point_clouds.models import PointCloud, SurfaceConfig
from application.registration.models import EmConfig, ModelConfig
from application.registration.services import Registrar

logger = logging.getLogger(__name__)


def cycle_consistency(
    a: PointCloud,
    b: PointCloud,
    registrar: Registrar,
    model_cfg: ModelConfig = ModelConfig(),
    em_cfg: EmConfig = EmConfig(),
    surface_cfg: SurfaceConfig = SurfaceConfig(),
) -> tuple[float, float]:
    """
    Регистрирует A→B и B→A; возвращает (градусы, метры) отклонения
    композиции g_ab ∘ g_ba от тождества.
    """
    g_ab = registrar.register(a, b, model_cfg, em_cfg, surface_cfg, run_id="a_to_b").transform
    g_ba = registrar.register(b, a, model_cfg, em_cfg, surface_cfg, run_id="b_to_a").transform
    cycle = g_ab.compose(g_ba)
    rotation_deg = float(np.degrees(cycle.rotation_angle()))
    translation_m = float(np.linalg.norm(cycle.translation))
    logger.info(
        "Cycle consistency measured",
        extra={"rot_err_deg": rotation_deg, "trans_err_m": translation_m},
    )
    return rotation_deg, translation_m
