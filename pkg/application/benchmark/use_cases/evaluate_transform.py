from pathlib import Path
from typing import Dict

from application.benchmark.services import error_metric, rotation_error, translation_error
from application.point_clouds.services import load_cloud
from application.registration.services import load_transform


def evaluate_transform(source_path: Path, estimate_path: Path, truth_path: Path) -> Dict[str, float]:
    """Метрики оценки относительно истины по точкам source"""
    source = load_cloud(source_path)
    estimate = load_transform(estimate_path)
    truth = load_transform(truth_path)
    return {
        "error_m": error_metric(source, estimate, truth),
        "rot_err_deg": rotation_error(estimate, truth),
        "trans_err_m": translation_error(estimate, truth),
    }
