import logging
import time
from typing import Optional

import numpy as np

from application.point_clouds.models import PointCloud, SurfaceConfig
from application.point_clouds.services import SurfaceEstimator
from application.registration.exceptions import EmptyCorrespondenceError, RegistrationError
from application.registration.models import (
    CorrespondenceMatrix,
    EmConfig,
    ModelConfig,
    RegistrationReport,
    RigidTransform,
)
from application.registration.services.correspondence import (
    correspondence,
    precompute_terms,
    refresh_weights,
)
from application.registration.services.gmm_model import (
    MIN_POINTS,
    build_model,
    estimate_outlier_weight,
)
from application.registration.services.likelihood import negative_log_likelihood
from application.registration.services.newton_solver import newton_solve
from core.workers import SERIAL_POOL, WorkerPool

logger = logging.getLogger(__name__)

# Np ниже этой доли от N считается пустой массой соответствий
EMPTY_MASS = 1e-12
EMPTY_MASS_PATIENCE = 3


class Registrar:
    """Цикл EM: E-шаг (P), M-шаг (Ньютон на SE(3) и σ²), контроль сходимости"""

    def __init__(self, pool: WorkerPool = SERIAL_POOL):
        self.pool = pool

    def annotate(self, cloud: PointCloud, surface_cfg: SurfaceConfig = SurfaceConfig()) -> PointCloud:
        return SurfaceEstimator(
            k=surface_cfg.k_neighbors,
            trust_normals=surface_cfg.trust_normals,
            pool=self.pool,
        ).annotate(cloud)

    def register(
        self,
        source: PointCloud,
        target: PointCloud,
        model_cfg: ModelConfig = ModelConfig(),
        em_cfg: EmConfig = EmConfig(),
        surface_cfg: SurfaceConfig = SurfaceConfig(),
        initial: Optional[RigidTransform] = None,
        keep_correspondence: bool = False,
        run_id: Optional[str] = None,
    ) -> RegistrationReport:
        started = time.perf_counter()
        if len(source) < MIN_POINTS:
            raise RegistrationError(
                code="too_few_points",
                message=f"Source needs at least {MIN_POINTS} points, got {len(source)}",
            )

        if not target.is_annotated:
            target = self.annotate(target, surface_cfg)

        source_count = len(source)
        model = build_model(target, source, model_cfg, seed=em_cfg.seed)
        if len(model.source_indices) != len(source):
            source = source.subset(model.source_indices)
        terms = precompute_terms(model, source)

        g = initial if initial is not None else RigidTransform.identity()
        nll_trace = [negative_log_likelihood(model, source, g, self.pool)]
        sigma2_trace = [model.sigma2]
        e_step_time = m_step_time = 0.0
        newton_iterations = damped_steps = empty_iterations = 0
        stop_reason = "max_iterations"
        converged = False
        P: Optional[CorrespondenceMatrix] = None
        iteration = 0

        for iteration in range(1, em_cfg.max_iterations + 1):
            tick = time.perf_counter()
            P = correspondence(model, source, g, terms, self.pool)
            e_step_time += time.perf_counter() - tick

            if P.n_p <= EMPTY_MASS * len(source):
                empty_iterations += 1
                logger.warning(
                    "Correspondence mass vanished",
                    extra={"run_id": run_id, "iteration": iteration, "phase": "e_step"},
                )
                if empty_iterations >= EMPTY_MASS_PATIENCE:
                    raise EmptyCorrespondenceError(
                        details={"iterations": empty_iterations, "sigma2": model.sigma2}
                    )
                continue
            empty_iterations = 0

            tick = time.perf_counter()
            result = newton_solve(P, model, source, g, self.pool)
            m_step_time += time.perf_counter() - tick

            step = g.inverse().compose(result.transform)
            g = result.transform
            model = model.with_sigma2(result.sigma2)
            nll = negative_log_likelihood(model, source, g, self.pool)
            previous = nll_trace[-1]
            nll_trace.append(nll)
            sigma2_trace.append(model.sigma2)
            newton_iterations += result.newton_iters
            damped_steps += int(result.damped)

            logger.debug(
                "EM iteration done",
                extra={
                    "run_id": run_id,
                    "iteration": iteration,
                    "phase": "m_step",
                    "nll": nll,
                    "sigma2": model.sigma2,
                    "w0": model.w0,
                    "np": P.n_p,
                    "newton_iters": result.newton_iters,
                    "damped": result.damped,
                },
            )

            # w0 пересчитывается после записи L, пара E+M идет при одном w0
            if model_cfg.recompute_outlier_weight and model.outlier_ratio > 0.0:
                model = model.with_outlier_weight(
                    estimate_outlier_weight(model, model.outlier_ratio)
                )
                terms = refresh_weights(terms, model)

            if abs(previous - nll) <= em_cfg.tol_nll * abs(previous):
                stop_reason, converged = "nll", True
            elif (
                not result.damped
                and step.rotation_angle() < em_cfg.tol_rotation
                and float(np.linalg.norm(step.translation)) < em_cfg.tol_translation
            ):
                stop_reason, converged = "step", True
            elif em_cfg.stop_rule is not None and em_cfg.stop_rule(g):
                stop_reason, converged = "stop_rule", True
            if converged:
                break

        report = RegistrationReport(
            transform=g,
            nll_trace=nll_trace,
            sigma2_trace=sigma2_trace,
            iterations=iteration,
            converged=converged,
            stop_reason=stop_reason,
            wall_time=time.perf_counter() - started,
            e_step_time=e_step_time,
            m_step_time=m_step_time,
            newton_iterations=newton_iterations,
            damped_steps=damped_steps,
            mean_alpha=model.mean_alpha,
            w0=model.w0,
            truncated_source=source_count - len(source),
            truncated_target=len(target) - model.component_count,
            correspondence=P if keep_correspondence else None,
        )
        logger.info(
            "Registration finished",
            extra={
                "run_id": run_id,
                "iterations": report.iterations,
                "converged": report.converged,
                "stop_reason": report.stop_reason,
                "nll": nll_trace[-1],
                "wall_time": report.wall_time,
            },
        )
        return report


def register(
    source: PointCloud,
    target: PointCloud,
    model_cfg: ModelConfig = ModelConfig(),
    em_cfg: EmConfig = EmConfig(),
    pool: WorkerPool = SERIAL_POOL,
    **kwargs,
) -> RegistrationReport:
    return Registrar(pool).register(source, target, model_cfg, em_cfg, **kwargs)
