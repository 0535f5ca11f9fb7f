import logging
from typing import Optional

import numpy as np
from scipy.special import expit, logsumexp

from application.point_clouds.models import PointCloud, MAX_VARIATION
from application.point_clouds.services import KAPPA_FLOOR, build_index
from application.registration.exceptions import (
    DegenerateTargetError,
    InvalidKappaError,
    TargetNotAnnotatedError,
    ZeroConfidenceError,
)
from application.registration.models import GmmModel, ModelConfig

logger = logging.getLogger(__name__)

MIN_POINTS = 3
# Ось считается вырожденной, если ее протяженность ниже этой доли от наибольшей
ZERO_EXTENT = 1e-12
# w0 строго меньше 1
MAX_OUTLIER_WEIGHT = 1.0 - 1e-12


def alpha_coefficient(
    kappa: float | np.ndarray, lambda_: float, alpha_max: float
) -> float | np.ndarray:
    """
    α = α_max·(1 − e^{λ(3−1/κ)}) / (1 + e^{λ(3−1/κ)}) = α_max·tanh(λ(1/κ − 3)/2).

    Убывает по κ: α → α_max при κ → 0, α = 0 при κ = 1/3.
    """
    kappa_array = np.asarray(kappa, dtype=np.float64)
    if np.any(kappa_array <= 0.0):
        raise InvalidKappaError(details={"min_kappa": float(kappa_array.min())})
    alpha = alpha_max * np.tanh(0.5 * lambda_ * (1.0 / kappa_array - 3.0))
    alpha = np.clip(alpha, 0.0, alpha_max)
    return float(alpha) if alpha.ndim == 0 else alpha


def inverse_covariance(normal: np.ndarray, alpha: float, sigma2: float) -> np.ndarray:
    """Σ⁻¹ = (α n nᵀ + I)/σ²"""
    normal = np.asarray(normal, dtype=np.float64).reshape(3)
    return (alpha * np.outer(normal, normal) + np.eye(3)) / sigma2


def component_normalizer(alpha: float | np.ndarray, sigma2: float) -> float | np.ndarray:
    """c = √(1+α) / (2πσ²)^{3/2}"""
    return np.sqrt(1.0 + np.asarray(alpha)) / (2.0 * np.pi * sigma2) ** 1.5


def estimate_outlier_weight(model: GmmModel, eta: float) -> float:
    """
    Верхняя граница w0 из ожидаемого числа выбросов:
    w_max = ηV·Σπc / ((1−η) + ηV·Σπc).

    Считается через логарифмы: при малых σ² произведение V·Σπc переполняется.
    """
    if eta <= 0.0:
        return 0.0
    log_mass = logsumexp(np.log(model.priors) + model.log_normalizers())
    logit = np.log(eta) + np.log(model.volume) + log_mass - np.log1p(-eta)
    return float(min(expit(logit), MAX_OUTLIER_WEIGHT))


def mean_nearest_spacing(points: np.ndarray) -> float:
    if len(points) < 2:
        return 0.0
    index = build_index(points)
    spacing = [index.knn(point, 2)[1][1] for point in points]
    return float(np.mean(spacing))


def working_volume(target: PointCloud, margin: float) -> float:
    """
    Объем bounding box target, расширенного на margin с каждой стороны по каждой оси.

    Нулевая протяженность оси заменяется средним расстоянием до ближайшего соседа.
    """
    if len(target) == 0:
        raise DegenerateTargetError(message="Working space of an empty cloud")
    lower, upper = target.bounding_box()
    extent = upper - lower
    degenerate = extent <= ZERO_EXTENT * max(float(extent.max()), 1.0)
    if np.any(degenerate):
        spacing = mean_nearest_spacing(target.points)
        if spacing <= 0.0:
            raise DegenerateTargetError(
                message="Working space has zero volume",
                details={"extent": extent.tolist()},
            )
        extent = np.where(degenerate, spacing, extent)
        logger.debug(
            "Zero-extent axis floored",
            extra={"axes": np.flatnonzero(degenerate).tolist(), "spacing": spacing},
        )
    return float(np.prod(extent * (1.0 + 2.0 * margin)))


def depth_confidence(points: np.ndarray, config: ModelConfig) -> np.ndarray:
    """φ = e_min / e(z), e(z) = c0 + c1·z²; глубина - координата z в системе камеры"""
    c0, c1 = config.error_model
    depth = np.asarray(points, dtype=np.float64)[:, 2]
    error = c0 + c1 * depth * depth
    e_min = c0 + c1 * config.min_range**2
    return np.clip(e_min / error, 0.0, 1.0)


def _confidences(
    cloud: PointCloud, explicit: Optional[np.ndarray], config: ModelConfig
) -> np.ndarray:
    if explicit is not None:
        return np.clip(np.asarray(explicit, dtype=np.float64), 0.0, 1.0)
    if cloud.confidences is not None:
        return np.array(cloud.confidences)
    return depth_confidence(cloud.points, config)


def apply_confidence_filter(
    model: GmmModel,
    source: PointCloud,
    target: PointCloud,
    config: ModelConfig,
    source_confidence: Optional[np.ndarray] = None,
    target_confidence: Optional[np.ndarray] = None,
) -> GmmModel:
    """
    π(m) = φ(y_m)/Σφ(y_m), w_n = 1 − (1−w0)·φ(x_n).

    Источник φ: явный массив, затем канал облака, затем модель ошибки глубины.
    Точки с φ ниже порога отбрасываются; компоненты с φ = 0 отбрасываются всегда.
    """
    phi_target = _confidences(target, target_confidence, config)[model.target_indices]
    phi_source = _confidences(source, source_confidence, config)[model.source_indices]
    if not np.any(phi_target > 0.0) or not np.any(phi_source > 0.0):
        raise ZeroConfidenceError()

    threshold = config.confidence_truncation_threshold
    keep_target = (phi_target > 0.0) & (phi_target >= threshold)
    keep_source = phi_source >= threshold
    if not np.any(keep_target) or not np.any(keep_source):
        raise ZeroConfidenceError(
            message="Confidence truncation removed every point",
            details={"threshold": threshold},
        )

    phi_target = phi_target[keep_target]
    filtered = GmmModel(
        centroids=model.centroids[keep_target],
        normals=model.normals[keep_target],
        alphas=model.alphas[keep_target],
        priors=phi_target / phi_target.sum(),
        sigma2=model.sigma2,
        volume=model.volume,
        w0=model.w0,
        outlier_weights=np.full(int(keep_source.sum()), model.w0),
        source_confidences=phi_source[keep_source],
        outlier_ratio=model.outlier_ratio,
        consistent_normalizer=model.consistent_normalizer,
        source_indices=model.source_indices[keep_source],
        target_indices=model.target_indices[keep_target],
    )
    filtered = filtered.with_outlier_weight(
        estimate_outlier_weight(filtered, filtered.outlier_ratio)
    )

    logger.debug(
        "Confidence filter applied",
        extra={
            "truncated_source": int((~keep_source).sum()),
            "truncated_target": int((~keep_target).sum()),
            "w0": filtered.w0,
        },
    )
    return filtered


def initial_sigma2(
    source: np.ndarray,
    target: np.ndarray,
    exact_limit: int,
    subsample: int,
    rng: np.random.Generator,
) -> float:
    """
    σ²₀ = Σ_{m,n}‖x_n − y_m‖² / (3NM).

    Сумма по парам раскрывается через центрированные моменты; при N·M выше
    exact_limit берется равномерная подвыборка без возвращения.
    """
    if len(source) * len(target) > exact_limit:
        if len(source) > subsample:
            source = source[np.sort(rng.choice(len(source), subsample, replace=False))]
        if len(target) > subsample:
            target = target[np.sort(rng.choice(len(target), subsample, replace=False))]

    n, m = len(source), len(target)
    center = target.mean(axis=0)
    xc = source - center
    yc = target - center
    total = (
        m * np.einsum("ij,ij->", xc, xc)
        + n * np.einsum("ij,ij->", yc, yc)
        - 2.0 * xc.sum(axis=0) @ yc.sum(axis=0)
    )
    return float(max(total / (3.0 * n * m), np.finfo(np.float64).tiny))


def check_target_geometry(target: PointCloud) -> None:
    if len(target) < MIN_POINTS:
        raise DegenerateTargetError(
            message=f"Target needs at least {MIN_POINTS} points, got {len(target)}"
        )
    centered = target.points - target.points.mean(axis=0)
    singular = np.linalg.svd(centered, compute_uv=False)
    if singular[0] <= 0.0 or singular[1] <= 1e-12 * singular[0]:
        raise DegenerateTargetError(
            message="Target points are collinear",
            details={"singular_values": singular.tolist()},
        )


def build_model(
    target: PointCloud,
    source: PointCloud,
    config: ModelConfig,
    seed: int = 0,
    source_confidence: Optional[np.ndarray] = None,
    target_confidence: Optional[np.ndarray] = None,
) -> GmmModel:
    """Смесь на target: центры, нормали, α по κ, V, σ²₀, π, w0 и w_n"""
    if not target.is_annotated:
        raise TargetNotAnnotatedError()
    check_target_geometry(target)

    kappa = np.clip(target.variations, KAPPA_FLOOR, MAX_VARIATION)
    alphas = alpha_coefficient(kappa, config.lambda_, config.alpha_max)
    rng = np.random.default_rng(seed)
    sigma2 = initial_sigma2(
        source.points,
        target.points,
        config.sigma2_exact_limit,
        config.sigma2_subsample,
        rng,
    )

    m, n = len(target), len(source)
    model = GmmModel(
        centroids=target.points,
        normals=target.normals,
        alphas=np.atleast_1d(alphas),
        priors=np.full(m, 1.0 / m),
        sigma2=sigma2,
        volume=working_volume(target, config.volume_margin),
        w0=0.0,
        outlier_weights=np.zeros(n),
        source_confidences=np.ones(n),
        outlier_ratio=config.outlier_ratio,
        consistent_normalizer=config.consistent_normalizer,
        source_indices=np.arange(n),
        target_indices=np.arange(m),
    )
    model = model.with_outlier_weight(estimate_outlier_weight(model, config.outlier_ratio))

    if config.use_cf:
        model = apply_confidence_filter(
            model, source, target, config, source_confidence, target_confidence
        )

    logger.debug(
        "Mixture model built",
        extra={
            "components": model.component_count,
            "source_points": len(model.source_indices),
            "sigma2": model.sigma2,
            "volume": model.volume,
            "w0": model.w0,
            "mean_alpha": model.mean_alpha,
        },
    )
    return model
