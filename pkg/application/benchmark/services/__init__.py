from application.benchmark.services.corruption import corrupt, random_perturbation
from application.benchmark.services.metrics import (
    error_metric,
    rotation_error,
    translation_error,
)
from application.benchmark.services.sweep import (
    SweepRunner,
    csv_columns,
    early_stop_rule,
    sweep_specs,
)
from application.benchmark.services.cycle import cycle_consistency

__all__ = [
    "corrupt",
    "random_perturbation",
    "error_metric",
    "rotation_error",
    "translation_error",
    "SweepRunner",
    "csv_columns",
    "early_stop_rule",
    "sweep_specs",
    "cycle_consistency",
]
