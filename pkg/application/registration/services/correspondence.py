import logging
from typing import Optional

import numpy as np
from scipy.special import logsumexp

from application.point_clouds.models import PointCloud
from application.registration.exceptions import NonFiniteExponentError
from application.registration.models import (
    CorrespondenceMatrix,
    GmmModel,
    PrecomputedTerms,
    RigidTransform,
)
from core.workers import SERIAL_POOL, WorkerPool

logger = logging.getLogger(__name__)

# w_n = 0 заменяется этим значением, чтобы (1−w)/w было конечным
OUTLIER_WEIGHT_FLOOR = 1e-12


def floored_outlier_weights(model: GmmModel) -> np.ndarray:
    return np.maximum(np.asarray(model.outlier_weights), OUTLIER_WEIGHT_FLOOR)


def _weight_terms(model: GmmModel) -> tuple[np.ndarray, np.ndarray]:
    """C и log C; строка m масштабируется на √(1+α_m) при consistent_normalizer"""
    w = floored_outlier_weights(model)
    log_row = np.log(model.priors)
    if model.consistent_normalizer:
        log_row = log_row + 0.5 * np.log1p(model.alphas)
    with np.errstate(divide="ignore"):
        log_col = np.log1p(-w) - np.log(w)
    log_c = log_row[:, None] + log_col[None, :]
    return np.exp(log_c), log_c


def precompute_terms(model: GmmModel, source: PointCloud) -> PrecomputedTerms:
    """Слагаемые, не зависящие от g: s, Q, C, D"""
    y = model.centroids
    x = source.points
    c_matrix, log_c = _weight_terms(model)
    return PrecomputedTerms(
        s=np.einsum("mi,mi->m", y, model.normals),
        q_matrix=np.einsum("ni,ni->n", x, x)[None, :] + np.einsum("mi,mi->m", y, y)[:, None],
        c_matrix=c_matrix,
        log_c=log_c,
        alphas=model.alphas,
    )


def refresh_weights(terms: PrecomputedTerms, model: GmmModel) -> PrecomputedTerms:
    """Пересборка C после смены w_n или π; s и Q не меняются"""
    c_matrix, log_c = _weight_terms(model)
    return terms.model_copy(update={"c_matrix": c_matrix, "log_c": log_c})


def log_outlier_term(model: GmmModel) -> float:
    """log γ, γ = (2πσ²)^{3/2}/V"""
    return 1.5 * np.log(2.0 * np.pi * model.sigma2) - np.log(model.volume)


def correspondence(
    model: GmmModel,
    source: PointCloud,
    transform: RigidTransform,
    terms: PrecomputedTerms,
    pool: WorkerPool = SERIAL_POOL,
) -> CorrespondenceMatrix:
    """
    Апостериорные P через матричное разложение:
    A = (N R Xᵀ + N t 1ᵀ − s 1ᵀ)², B = Q + tᵀt + 2(1tᵀRXᵀ − Y R Xᵀ − Y t 1ᵀ),
    K = C ⊙ exp(−(DA + B)/2σ²), P = K / (1ᵀK + γ).

    Нормировка по столбцам идет в логарифмах (logsumexp), столбцы
    считаются независимыми чанками пула.
    """
    rotated = source.points @ transform.rotation.T
    t = transform.translation
    y = model.centroids
    normals = model.normals
    alphas = terms.alphas
    scale = -0.5 / model.sigma2
    log_gamma = log_outlier_term(model)
    normal_shift = normals @ t - terms.s
    y_shift = y @ t
    tt = float(t @ t)

    def column_block(start: int, stop: int) -> tuple[np.ndarray, np.ndarray]:
        rx = rotated[start:stop]
        a = (normals @ rx.T + normal_shift[:, None]) ** 2
        b = (
            terms.q_matrix[:, start:stop]
            + tt
            + 2.0 * ((rx @ t)[None, :] - y @ rx.T - y_shift[:, None])
        )
        log_k = terms.log_c[:, start:stop] + scale * (alphas[:, None] * a + b)
        with np.errstate(divide="ignore"):
            log_norm = np.logaddexp(logsumexp(log_k, axis=0), log_gamma)
        return np.exp(log_k - log_norm[None, :]), np.exp(log_gamma - log_norm)

    blocks = pool.map_chunks(column_block, len(source))
    if blocks:
        P = np.concatenate([block[0] for block in blocks], axis=1)
        outlier = np.concatenate([block[1] for block in blocks])
    else:
        P = np.zeros((model.component_count, 0))
        outlier = np.zeros(0)

    if not (np.all(np.isfinite(P)) and np.all(np.isfinite(outlier))):
        raise NonFiniteExponentError(details={"sigma2": model.sigma2})
    return CorrespondenceMatrix.from_posteriors(P, outlier)


def naive_correspondence(
    model: GmmModel, source: PointCloud, transform: RigidTransform
) -> CorrespondenceMatrix:
    """
    Прямая формула Байеса по каждой паре с полной формой Махаланобиса.

    Только для проверок: O(MN) итераций Python.
    """
    m_count, n_count = model.component_count, len(source)
    P = np.zeros((m_count, n_count))
    outlier = np.zeros(n_count)
    weights = floored_outlier_weights(model)
    log_c = model.log_normalizers()
    moved = transform.apply(source.points)

    for n in range(n_count):
        w = weights[n]
        logs = np.empty(m_count)
        for m in range(m_count):
            d = moved[n] - model.centroids[m]
            inv_cov = (
                model.alphas[m] * np.outer(model.normals[m], model.normals[m]) + np.eye(3)
            ) / model.sigma2
            logs[m] = (
                np.log1p(-w) + np.log(model.priors[m]) + log_c[m] - 0.5 * d @ inv_cov @ d
            ) if w < 1.0 else -np.inf
        log_outlier = np.log(w) - np.log(model.volume)
        shift = max(float(logs.max()) if m_count else -np.inf, log_outlier)
        mass = np.exp(logs - shift)
        outlier_mass = np.exp(log_outlier - shift)
        total = mass.sum() + outlier_mass
        P[:, n] = mass / total
        outlier[n] = outlier_mass / total

    return CorrespondenceMatrix.from_posteriors(P, outlier)


def dump_correspondence(P: CorrespondenceMatrix, path: str, fmt: Optional[str] = None) -> None:
    """P в CSV: M строк по N значений"""
    np.savetxt(path, P.P, delimiter=",", fmt=fmt or "%.17g")
