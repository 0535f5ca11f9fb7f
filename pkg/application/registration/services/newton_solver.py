import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from application.point_clouds.models import PointCloud
from application.registration.models import (
    CorrespondenceMatrix,
    GmmModel,
    MStepResult,
    RigidTransform,
)
from application.registration.services.se3 import SE3_BASIS, exp_twist
from core.workers import SERIAL_POOL, WorkerPool

logger = logging.getLogger(__name__)

SIGMA2_FLOOR = 1e-12
MAX_NEWTON_ITERATIONS = 20
MAX_BACKTRACKS = 20
STEP_TOLERANCE = 1e-10
DAMPING_GROWTH = 10.0
DAMPING_START = 1e-6

# E_j E_i для всех пар; произведение элементов se(3) имеет нулевую последнюю строку
_BASIS_PRODUCTS = np.einsum("jab,ibc->jiac", SE3_BASIS, SE3_BASIS)


@dataclass(frozen=True)
class _Accumulated:
    """Суммы по компонентам m для фиксированного g"""

    weighted_residual: float  # Σ P r
    prior_term: float  # Σ P (log π + log c)
    residual_force: np.ndarray  # F_n = Σ_m P_mn (d + α_m n_m n_mᵀ d), N×3
    column_mass: np.ndarray  # Σ_m P_mn, N
    normal_scatter: Optional[np.ndarray]  # Σ_m P_mn α_m n_m n_mᵀ, N×3×3


def _generators(points: np.ndarray) -> np.ndarray:
    """(E_i x̃_n)[:3] для всех n, i: N×6×3"""
    return (
        np.einsum("iab,nb->nia", SE3_BASIS[:, :3, :3], points)
        + SE3_BASIS[None, :, :3, 3]
    )


def _accumulate(
    P: CorrespondenceMatrix,
    model: GmmModel,
    source: PointCloud,
    g: RigidTransform,
    pool: WorkerPool,
    with_scatter: bool = False,
) -> _Accumulated:
    # Разности считаются относительно центра target, чтобы не терять точность
    center = model.centroids.mean(axis=0) if model.component_count else np.zeros(3)
    z = g.apply(source.points) - center
    zz = np.einsum("ni,ni->n", z, z)
    y_all = model.centroids - center
    log_prior = np.log(model.priors) + model.log_normalizers()
    matrix = np.asarray(P.P)

    def block(start: int, stop: int) -> tuple:
        p = matrix[start:stop]
        y = y_all[start:stop]
        normals = model.normals[start:stop]
        alphas = model.alphas[start:stop]

        u = normals @ z.T - np.einsum("mi,mi->m", normals, y)[:, None]
        dist2 = zz[None, :] + np.einsum("mi,mi->m", y, y)[:, None] - 2.0 * (y @ z.T)
        residual = np.maximum(dist2, 0.0) + alphas[:, None] * u * u

        column_mass = p.sum(axis=0)
        weighted = p * alphas[:, None] * u
        force = column_mass[:, None] * z - p.T @ y + weighted.T @ normals
        scatter = None
        if with_scatter:
            outer = np.einsum("mi,mj->mij", normals, normals).reshape(-1, 9)
            scatter = ((p * alphas[:, None]).T @ outer).reshape(-1, 3, 3)
        return (
            np.array(np.sum(p * residual)),
            np.array(p.sum(axis=1) @ log_prior[start:stop]),
            force,
            column_mass,
            scatter,
        )

    parts = pool.map_chunks(block, model.component_count)
    n = len(source)
    if not parts:
        return _Accumulated(
            0.0, 0.0, np.zeros((n, 3)), np.zeros(n), np.zeros((n, 3, 3)) if with_scatter else None
        )
    reduce = pool.reduce_pairwise
    return _Accumulated(
        weighted_residual=float(reduce([part[0] for part in parts])),
        prior_term=float(reduce([part[1] for part in parts])),
        residual_force=reduce([part[2] for part in parts]),
        column_mass=reduce([part[3] for part in parts]),
        normal_scatter=reduce([part[4] for part in parts]) if with_scatter else None,
    )


def objective_q(
    P: CorrespondenceMatrix,
    model: GmmModel,
    source: PointCloud,
    g: RigidTransform,
    pool: WorkerPool = SERIAL_POOL,
) -> float:
    """Q(g, σ²) = Σ P_mn [r_mn/(2σ²) − log π(m) − log c_m], r = ‖d‖² + α(nᵀd)²"""
    acc = _accumulate(P, model, source, g, pool)
    return acc.weighted_residual / (2.0 * model.sigma2) - acc.prior_term


def _gradient_from(acc: _Accumulated, g: RigidTransform, generators: np.ndarray, sigma2: float):
    local_force = acc.residual_force @ g.rotation
    return np.einsum("na,nia->i", local_force, generators) / sigma2, local_force


def gradient(
    P: CorrespondenceMatrix,
    model: GmmModel,
    source: PointCloud,
    g: RigidTransform,
    pool: WorkerPool = SERIAL_POOL,
) -> np.ndarray:
    """
    Правые производные Q вдоль E_i:
    ∇Q[i] = Σ P_mn (g̃x̃_n − ỹ_m)ᵀ Σ̃⁻¹_m g̃ E_i x̃_n.
    """
    acc = _accumulate(P, model, source, g, pool)
    grad, _ = _gradient_from(acc, g, _generators(source.points), model.sigma2)
    return grad


def _hessian_from(
    acc: _Accumulated,
    g: RigidTransform,
    points: np.ndarray,
    generators: np.ndarray,
    local_force: np.ndarray,
    sigma2: float,
) -> np.ndarray:
    rotation = g.rotation
    # Σ_m P_mn Σ_m⁻¹·σ² в локальной системе g: c_n I + Rᵀ S_n R
    local_scatter = np.einsum("ai,nab,bj->nij", rotation, acc.normal_scatter, rotation)
    gauss = np.einsum("n,nia,nja->ij", acc.column_mass, generators, generators)
    gauss += np.einsum("nja,nab,nib->ij", generators, local_scatter, generators)

    second = (
        np.einsum("jiab,nb->jina", _BASIS_PRODUCTS[:, :, :3, :3], points)
        + _BASIS_PRODUCTS[:, :, None, :3, 3]
    )
    curvature = np.einsum("na,jina->ij", local_force, second)
    return (gauss + curvature) / sigma2


def hessian(
    P: CorrespondenceMatrix,
    model: GmmModel,
    source: PointCloud,
    g: RigidTransform,
    pool: WorkerPool = SERIAL_POOL,
) -> np.ndarray:
    """
    H_ij = Σ P_mn [(g̃E_jx̃)ᵀ Σ̃⁻¹ (g̃E_ix̃) + (g̃x̃ − ỹ)ᵀ Σ̃⁻¹ g̃ E_j E_i x̃];
    в общем случае несимметрична.
    """
    acc = _accumulate(P, model, source, g, pool, with_scatter=True)
    generators = _generators(source.points)
    _, local_force = _gradient_from(acc, g, generators, model.sigma2)
    return _hessian_from(acc, g, source.points, generators, local_force, model.sigma2)


def update_sigma2(
    P: CorrespondenceMatrix,
    model: GmmModel,
    source: PointCloud,
    g: RigidTransform,
    pool: WorkerPool = SERIAL_POOL,
) -> float:
    """σ² = Σ P r / (3·Np) - стационарная точка Q по σ²; при Np = 0 σ² не меняется"""
    if not P.n_p > 0.0:
        return model.sigma2
    acc = _accumulate(P, model, source, g, pool)
    return max(acc.weighted_residual / (3.0 * P.n_p), SIGMA2_FLOOR)


def _solve_step(hessian_sym: np.ndarray, grad: np.ndarray, damping: float) -> Optional[np.ndarray]:
    try:
        step = -np.linalg.solve(hessian_sym + damping * np.eye(6), grad)
    except np.linalg.LinAlgError:
        return None
    return step if np.all(np.isfinite(step)) else None


def newton_solve(
    P: CorrespondenceMatrix,
    model: GmmModel,
    source: PointCloud,
    g0: RigidTransform,
    pool: WorkerPool = SERIAL_POOL,
) -> MStepResult:
    """
    Ньютон на SE(3): g ← g ∘ exp(δ), δ = −(H_s + μI)⁻¹∇Q, H_s = (H + Hᵀ)/2.

    μ растет ×10, пока шаг строго не уменьшит Q (не более MAX_BACKTRACKS попыток).
    Если ни один шаг не принят, возвращается g0 с флагом damped.
    """
    points = source.points
    generators = _generators(points)
    sigma2 = model.sigma2

    g = g0
    acc = _accumulate(P, model, source, g, pool, with_scatter=True)
    q_current = acc.weighted_residual / (2.0 * sigma2) - acc.prior_term
    iterations = 0
    exhausted = False

    while iterations < MAX_NEWTON_ITERATIONS:
        grad, local_force = _gradient_from(acc, g, generators, sigma2)
        full = _hessian_from(acc, g, points, generators, local_force, sigma2)
        hessian_sym = 0.5 * (full + full.T)

        damping = 0.0
        step = _solve_step(hessian_sym, grad, damping)
        if step is not None and np.linalg.norm(step) < STEP_TOLERANCE:
            break

        damping_start = DAMPING_START * max(float(np.mean(np.abs(np.diag(hessian_sym)))), 1e-12)
        accepted = False
        for _ in range(MAX_BACKTRACKS):
            if step is not None:
                candidate = g.compose(exp_twist(step))
                candidate_acc = _accumulate(P, model, source, candidate, pool, with_scatter=True)
                q_candidate = (
                    candidate_acc.weighted_residual / (2.0 * sigma2) - candidate_acc.prior_term
                )
                if q_candidate < q_current:
                    g, acc, q_current = candidate, candidate_acc, q_candidate
                    accepted = True
                    break
            damping = damping * DAMPING_GROWTH if damping > 0.0 else damping_start
            step = _solve_step(hessian_sym, grad, damping)

        if not accepted:
            exhausted = True
            break
        iterations += 1

    damped = exhausted and iterations == 0
    if damped:
        logger.debug("Newton damping exhausted", extra={"sigma2": sigma2})

    return MStepResult(
        transform=g,
        sigma2=update_sigma2(P, model, source, g, pool),
        q_value=q_current,
        newton_iters=iterations,
        damped=damped,
    )
