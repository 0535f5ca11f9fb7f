from typing import Callable, List, Optional

from typing_extensions import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from application.registration.models.transform import RigidTransform
from core.types.base import Float64Array, Int64Array

PRIOR_SUM_TOLERANCE = 1e-12


class ModelConfig(BaseModel):
    """Параметры смеси на стороне target"""

    model_config = ConfigDict(frozen=True, populate_by_name=True, extra="forbid")

    alpha_max: float = Field(
        default=50.0, ge=0.0, description="Верхняя граница коэффициента α"
    )
    lambda_: float = Field(
        default=0.5,
        gt=0.0,
        alias="lambda",
        description="Крутизна сигмоиды α(κ)",
    )
    outlier_ratio: float = Field(
        default=0.0, ge=0.0, lt=1.0, description="Ожидаемая доля выбросов η"
    )
    use_cf: bool = Field(default=False, description="Фильтрация по достоверности")
    error_model: tuple[float, float] = Field(
        default=(0.0012, 0.0019),
        description="Модель ошибки глубины e(z) = c0 + c1·z², метры",
    )
    min_range: float = Field(
        default=0.5, gt=0.0, description="Минимальная дальность сенсора, e_min = e(min_range)"
    )
    confidence_truncation_threshold: float = Field(
        default=0.0,
        ge=0.0,
        le=1.0,
        description="Точки с φ ниже порога отбрасываются",
    )
    consistent_normalizer: bool = Field(
        default=True,
        description="Множитель √(1+α) в нормировке компонент E-шага",
    )
    volume_margin: float = Field(
        default=0.1, ge=0.0, description="Расширение bounding box target по каждой оси (доля)"
    )
    sigma2_exact_limit: int = Field(
        default=10_000_000, ge=1, description="N·M, до которого σ²₀ считается точно"
    )
    sigma2_subsample: int = Field(
        default=3000, ge=1, description="Размер подвыборки для σ²₀ на облако"
    )
    recompute_outlier_weight: bool = Field(
        default=True, description="Пересчитывать w0 на каждой итерации EM"
    )

    @field_validator("error_model")
    @classmethod
    def _validate_error_model(cls, v: tuple[float, float]) -> tuple[float, float]:
        c0, c1 = v
        if c0 < 0.0 or c1 < 0.0 or c0 + c1 <= 0.0:
            raise ValueError("Error model coefficients must be non-negative, not both zero")
        return v


class EmConfig(BaseModel):
    """Параметры внешнего цикла EM"""

    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    max_iterations: int = Field(default=100, ge=1, description="Предел итераций EM")
    tol_nll: float = Field(
        default=1e-7, gt=0.0, description="Порог относительного изменения L"
    )
    tol_rotation: float = Field(
        default=1e-9, gt=0.0, description="Порог шага Ньютона по повороту, радианы"
    )
    tol_translation: float = Field(
        default=1e-9, gt=0.0, description="Порог шага Ньютона по сдвигу, метры"
    )
    seed: int = Field(default=0, ge=0, description="Seed для подвыборок")
    stop_rule: Optional[Callable[[RigidTransform], bool]] = Field(
        default=None,
        exclude=True,
        description="Внешнее правило остановки по текущему преобразованию",
    )


class GmmModel(BaseModel):
    """
    Смесь на target: компонента m - гауссиана с центром y_m и
    Σ_m⁻¹ = (α_m n_m n_mᵀ + I)/σ², плюс равномерный выброс 1/V.

    Между итерациями заменяются только σ² и w0 (новый объект).
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    centroids: Float64Array = Field(description="y_m, M×3")
    normals: Float64Array = Field(description="n_m, M×3")
    alphas: Float64Array = Field(description="α_m ∈ [0, α_max]")
    priors: Float64Array = Field(description="π(m), сумма 1")
    sigma2: float = Field(gt=0.0, description="σ², м²")
    volume: float = Field(gt=0.0, description="Объем рабочего пространства V, м³")
    w0: float = Field(ge=0.0, lt=1.0, description="Базовый вес выброса")
    outlier_weights: Float64Array = Field(description="w_n ∈ [w0, 1] для точек source")
    source_confidences: Float64Array = Field(description="φ(x_n); единицы без CF")
    outlier_ratio: float = Field(default=0.0, ge=0.0, lt=1.0, description="η")
    consistent_normalizer: bool = True
    source_indices: Int64Array = Field(description="Оставленные точки source")
    target_indices: Int64Array = Field(description="Оставленные точки target")

    @model_validator(mode="after")
    def _validate_shapes(self) -> Self:
        m = len(self.centroids)
        if self.centroids.shape != (m, 3) or self.normals.shape != (m, 3):
            raise ValueError("Centroids and normals must be M×3")
        if self.alphas.shape != (m,) or self.priors.shape != (m,):
            raise ValueError("Alphas and priors must have M entries")
        if len(self.target_indices) != m:
            raise ValueError("target_indices must have M entries")
        if np.any(self.alphas < 0.0):
            raise ValueError("Alphas must be non-negative")
        if m and (
            np.any(self.priors <= 0.0)
            or abs(float(self.priors.sum()) - 1.0) > PRIOR_SUM_TOLERANCE
        ):
            raise ValueError("Priors must be positive and sum to 1")
        n = len(self.outlier_weights)
        if self.source_confidences.shape != (n,) or len(self.source_indices) != n:
            raise ValueError("Source channels must have N entries")
        if n and (
            np.any(self.outlier_weights < self.w0 - 1e-15)
            or np.any(self.outlier_weights > 1.0)
        ):
            raise ValueError("Outlier weights must lie in [w0, 1]")
        return self

    @property
    def component_count(self) -> int:
        return len(self.centroids)

    @property
    def mean_alpha(self) -> float:
        return float(self.alphas.mean()) if len(self.alphas) else 0.0

    def log_normalizers(self) -> np.ndarray:
        """log c_m; без consistent_normalizer множитель √(1+α) опускается"""
        base = -1.5 * np.log(2.0 * np.pi * self.sigma2)
        if self.consistent_normalizer:
            return base + 0.5 * np.log1p(self.alphas)
        return np.full(len(self.alphas), base)

    def with_sigma2(self, sigma2: float) -> "GmmModel":
        return self.model_copy(update={"sigma2": float(sigma2)})

    def with_outlier_weight(self, w0: float) -> "GmmModel":
        """Новый w0 и пересчитанные w_n = 1 − (1−w0)·φ(x_n)"""
        weights = 1.0 - (1.0 - w0) * np.asarray(self.source_confidences)
        weights = np.clip(weights, w0, 1.0)
        weights.setflags(write=False)
        return self.model_copy(update={"w0": float(w0), "outlier_weights": weights})


class CorrespondenceMatrix(BaseModel):
    """Апостериорные вероятности соответствий P (M×N) и выбросов"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    P: Float64Array = Field(description="P_mn, M×N")
    outlier_posterior: Float64Array = Field(description="Апостериорная вероятность выброса, N")
    n_p: float = Field(ge=0.0, description="Np = Σ P_mn")

    @model_validator(mode="after")
    def _validate_shapes(self) -> Self:
        if self.P.ndim != 2 or self.outlier_posterior.shape != (self.P.shape[1],):
            raise ValueError("P must be M×N with N outlier posteriors")
        return self

    @classmethod
    def from_posteriors(
        cls, P: np.ndarray, outlier_posterior: np.ndarray
    ) -> "CorrespondenceMatrix":
        return cls(P=P, outlier_posterior=outlier_posterior, n_p=float(P.sum()))


class PrecomputedTerms(BaseModel):
    """Слагаемые E-шага, не зависящие от преобразования"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    s: Float64Array = Field(description="s_m = y_mᵀ n_m")
    q_matrix: Float64Array = Field(description="Q_mn = ‖x_n‖² + ‖y_m‖²")
    c_matrix: Float64Array = Field(description="C_mn = ((1−w_n)/w_n)·π(m)·масштаб нормировки")
    log_c: np.ndarray = Field(description="log C_mn (−inf при w_n = 1)")
    alphas: Float64Array = Field(description="Диагональ D")


class MStepResult(BaseModel):
    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    transform: RigidTransform
    sigma2: float = Field(gt=0.0)
    q_value: float
    newton_iters: int = Field(ge=0)
    damped: bool = False


class RegistrationReport(BaseModel):
    """Итог регистрации: преобразование, трассы L и σ², тайминги"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    transform: RigidTransform = Field(exclude=True)
    nll_trace: List[float] = Field(description="L(g, σ²) до первой и после каждой итерации")
    sigma2_trace: List[float]
    iterations: int = Field(ge=0)
    converged: bool
    stop_reason: str = Field(description="nll | step | stop_rule | max_iterations")
    wall_time: float = Field(ge=0.0, description="Секунды")
    e_step_time: float = Field(ge=0.0)
    m_step_time: float = Field(ge=0.0)
    newton_iterations: int = Field(default=0, ge=0)
    damped_steps: int = Field(default=0, ge=0)
    mean_alpha: float = Field(default=0.0, ge=0.0)
    w0: float = Field(default=0.0, ge=0.0)
    truncated_source: int = Field(default=0, ge=0)
    truncated_target: int = Field(default=0, ge=0)
    correspondence: Optional[CorrespondenceMatrix] = Field(default=None, exclude=True)

    def to_text(self) -> str:
        """JSON отчета и затем блок 4×4 преобразования"""
        return self.model_dump_json(indent=2) + "\n" + self.transform.to_text()
