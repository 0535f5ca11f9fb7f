import numpy as np
from scipy.special import logsumexp

from application.point_clouds.models import PointCloud
from application.registration.exceptions import OutsideWorkingSpaceError
from application.registration.models import GmmModel, RigidTransform
from core.workers import SERIAL_POOL, WorkerPool


def point_log_density(
    model: GmmModel,
    source: PointCloud,
    g: RigidTransform,
    pool: WorkerPool = SERIAL_POOL,
) -> np.ndarray:
    """log p(g(x_n)) = log(w_n/V + (1−w_n)·Σ_m π(m) c_m exp(−r_mn/2σ²))"""
    center = model.centroids.mean(axis=0)
    z = g.apply(source.points) - center
    y = model.centroids - center
    yy = np.einsum("mi,mi->m", y, y)
    s = np.einsum("mi,mi->m", y, model.normals)
    log_prior = np.log(model.priors) + model.log_normalizers()
    weights = np.asarray(model.outlier_weights)
    log_volume = np.log(model.volume)

    def column_block(start: int, stop: int) -> np.ndarray:
        zb = z[start:stop]
        u = model.normals @ zb.T - s[:, None]
        dist2 = np.einsum("ni,ni->n", zb, zb)[None, :] + yy[:, None] - 2.0 * (y @ zb.T)
        residual = np.maximum(dist2, 0.0) + model.alphas[:, None] * u * u
        w = weights[start:stop]
        with np.errstate(divide="ignore"):
            inlier = np.log1p(-w) + logsumexp(
                log_prior[:, None] - residual / (2.0 * model.sigma2), axis=0
            )
            outlier = np.log(w) - log_volume
        return np.logaddexp(inlier, outlier)

    parts = pool.map_chunks(column_block, len(source))
    return np.concatenate(parts) if parts else np.zeros(0)


def negative_log_likelihood(
    model: GmmModel,
    source: PointCloud,
    g: RigidTransform,
    pool: WorkerPool = SERIAL_POOL,
) -> float:
    """L(g, σ²) = −Σ_n log p(g(x_n))"""
    log_density = point_log_density(model, source, g, pool)
    if not np.all(np.isfinite(log_density)):
        bad = int(np.flatnonzero(~np.isfinite(log_density))[0])
        raise OutsideWorkingSpaceError(
            message=f"Source point {bad} has zero mixture density",
            details={"point": bad, "w_n": float(model.outlier_weights[bad])},
        )
    return float(-log_density.sum())
