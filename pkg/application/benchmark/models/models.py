import enum
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator

# Порядок колонок CSV фиксирован
CSV_COLUMNS = (
    "run_id",
    "outlier_ratio",
    "noise_std",
    "error_m",
    "rot_err_deg",
    "trans_err_m",
    "iters",
    "wall_s",
)
# Добавляется, если серия варьирует порог усечения CF
TRUNCATION_COLUMN = "truncation_threshold"


class PerturbationMode(str, enum.Enum):
    LARGE = "large"  # случайная ось, заданный угол
    SMALL = "small"  # ±0.05 рад по каждой оси, ±0.01 м


class CorruptionSpec(BaseModel):
    """Искажение облака: гауссовы выбросы и шум"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    outlier_ratio: float = Field(
        default=0.0, ge=0.0, description="Число выбросов как доля от N"
    )
    noise_std: float = Field(default=0.0, ge=0.0, description="СКО шума точек, метры")
    seed: int = Field(default=0, ge=0, description="Seed генератора")
    outlier_scale: float = Field(
        default=1.0, gt=0.0, description="Множитель СКО распределения выбросов"
    )


class SweepConfig(BaseModel):
    """Параметры серии регистраций"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    outlier_ratios: List[float] = Field(
        default=[0.0], description="Доли выбросов (через запятую)"
    )
    noise_stds: List[float] = Field(default=[0.0], description="СКО шума (через запятую)")
    repeats: int = Field(default=30, ge=1, description="Повторов на спецификацию")
    seed: int = Field(default=0, ge=0, description="Мастер-seed серии")
    perturbation: PerturbationMode = Field(
        default=PerturbationMode.LARGE, description="Режим возмущения: large | small"
    )
    angle_deg: float = Field(
        default=50.0, ge=0.0, description="Угол поворота в режиме large, градусы"
    )
    early_stop: bool = Field(
        default=False, description="Остановка при ошибке поворота < 8° и сдвига < 1 см"
    )
    outlier_scale: float = Field(
        default=1.0, gt=0.0, description="Множитель СКО распределения выбросов"
    )
    match_outlier_ratio: bool = Field(
        default=False, description="Подставлять η равной фактической доле выбросов"
    )
    truncation_thresholds: List[float] = Field(
        default=[],
        description="Пороги усечения CF (через запятую); непустой список включает use_cf",
    )

    @field_validator("outlier_ratios", "noise_stds")
    @classmethod
    def _validate_levels(cls, v: List[float]) -> List[float]:
        if not v or any(level < 0.0 for level in v):
            raise ValueError("Levels must be a non-empty list of non-negative numbers")
        return v

    @field_validator("truncation_thresholds")
    @classmethod
    def _validate_thresholds(cls, v: List[float]) -> List[float]:
        if any(not 0.0 <= threshold <= 1.0 for threshold in v):
            raise ValueError("Truncation thresholds must lie in [0, 1]")
        return v


class MetricRow(BaseModel):
    """Одна строка результатов серии"""

    model_config = ConfigDict(frozen=True)

    run_id: int = Field(ge=0)
    outlier_ratio: float = Field(ge=0.0)
    noise_std: float = Field(ge=0.0)
    error_m: float = Field(ge=0.0, description="Средняя ошибка образов точек, метры")
    rot_err_deg: float = Field(ge=0.0)
    trans_err_m: float = Field(ge=0.0)
    iters: int = Field(ge=0)
    wall_s: float = Field(ge=0.0)
    truncation_threshold: Optional[float] = Field(default=None, ge=0.0, le=1.0)
