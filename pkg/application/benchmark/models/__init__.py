from application.benchmark.models.models import (
    CSV_COLUMNS,
    TRUNCATION_COLUMN,
    CorruptionSpec,
    MetricRow,
    PerturbationMode,
    SweepConfig,
)

__all__ = [
    "CSV_COLUMNS",
    "TRUNCATION_COLUMN",
    "CorruptionSpec",
    "MetricRow",
    "PerturbationMode",
    "SweepConfig",
]
