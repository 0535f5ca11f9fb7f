import logging
from typing import Optional

import numpy as np

from application.point_clouds.exceptions import NeighborCountError
from application.point_clouds.models import LocalSurface, PointCloud, MAX_VARIATION
from application.point_clouds.services.kd_index import KdIndex, build_index
from core.workers import SERIAL_POOL, WorkerPool

logger = logging.getLogger(__name__)

# Нижняя граница κ: 1/κ в сигмоиде для α должна быть конечной
KAPPA_FLOOR = 1e-12
DEFAULT_NEIGHBORS = 20
DEGENERATE_NORMAL = np.array([0.0, 0.0, 1.0])
VIEWPOINT = np.zeros(3)
MIN_NEIGHBORS = 3


def _scatter_eigen(neighborhoods: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Собственные числа/векторы центрированной ковариации для стека окрестностей (B×k×3).

    Возвращает (normals B×3, kappa B, degenerate B).
    """
    centroids = neighborhoods.mean(axis=1, keepdims=True)
    centered = neighborhoods - centroids
    scatter = np.einsum("bki,bkj->bij", centered, centered) / neighborhoods.shape[1]
    eigenvalues, eigenvectors = np.linalg.eigh(scatter)
    eigenvalues = np.clip(eigenvalues, 0.0, None)

    trace = eigenvalues.sum(axis=1)
    scale = np.maximum(1.0, np.einsum("bi,bi->b", centroids[:, 0], centroids[:, 0]))
    degenerate = trace <= 1e-24 * scale

    safe_trace = np.where(degenerate, 1.0, trace)
    kappa = np.clip(eigenvalues[:, 0] / safe_trace, KAPPA_FLOOR, MAX_VARIATION)
    kappa = np.where(degenerate, MAX_VARIATION, kappa)

    normals = eigenvectors[:, :, 0].copy()
    normals[degenerate] = DEGENERATE_NORMAL
    normals /= np.linalg.norm(normals, axis=1, keepdims=True)
    return normals, kappa, degenerate


def _orient(
    normals: np.ndarray, anchors: np.ndarray, reference: Optional[np.ndarray]
) -> np.ndarray:
    """Знак нормали: по нормали из файла, иначе к точке обзора (начало координат)"""
    if reference is not None:
        flip = np.einsum("bi,bi->b", normals, reference) < 0.0
    else:
        flip = np.einsum("bi,bi->b", normals, VIEWPOINT - anchors) < 0.0
    oriented = normals.copy()
    oriented[flip] *= -1.0
    return oriented


def estimate_local_surface(
    points: np.ndarray, index: KdIndex, point_id: int, k: int = DEFAULT_NEIGHBORS
) -> LocalSurface:
    if k < MIN_NEIGHBORS:
        raise NeighborCountError(message=f"k must be at least {MIN_NEIGHBORS}, got {k}")
    neighbor_ids = index.knn_ids(points[point_id], k)
    normals, kappa, degenerate = _scatter_eigen(points[neighbor_ids][None])
    normal = _orient(normals, points[point_id][None], None)[0]
    if degenerate[0]:
        logger.debug("Degenerate neighborhood", extra={"point_id": point_id})
    return LocalSurface(
        normal=normal,
        variation=float(kappa[0]),
        neighborhood_size=len(neighbor_ids),
        degenerate=bool(degenerate[0]),
    )


class SurfaceEstimator:
    """Оценка нормалей и вариации поверхности по k ближайшим соседям"""

    def __init__(
        self,
        k: int = DEFAULT_NEIGHBORS,
        trust_normals: bool = False,
        pool: WorkerPool = SERIAL_POOL,
    ):
        if k < MIN_NEIGHBORS:
            raise NeighborCountError(
                message=f"k must be at least {MIN_NEIGHBORS}, got {k}"
            )
        self.k = k
        self.trust_normals = trust_normals
        self.pool = pool

    def annotate(self, cloud: PointCloud) -> PointCloud:
        n = len(cloud)
        if n < MIN_NEIGHBORS:
            raise NeighborCountError(
                message=f"Cloud has {n} points, surface estimation needs at least {MIN_NEIGHBORS}"
            )
        k = min(self.k, n)
        if k < self.k:
            logger.warning(
                "Neighborhood size clamped to cloud size",
                extra={"requested_k": self.k, "k": k},
            )

        index = build_index(cloud.points)
        points = index.points

        def estimate_chunk(start: int, stop: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
            neighbor_ids = np.stack(
                [index.knn_ids(points[i], k) for i in range(start, stop)]
            )
            return _scatter_eigen(points[neighbor_ids])

        parts = self.pool.map_chunks(estimate_chunk, n)
        normals = np.concatenate([part[0] for part in parts])
        kappa = np.concatenate([part[1] for part in parts])
        degenerate = np.concatenate([part[2] for part in parts])

        if self.trust_normals and cloud.normals is not None:
            normals = np.array(cloud.normals)
        else:
            normals = _orient(normals, points, cloud.normals)

        if np.any(degenerate):
            logger.warning(
                "Degenerate neighborhoods found",
                extra={"degenerate": int(degenerate.sum()), "points": n},
            )

        logger.debug(
            "Cloud annotated",
            extra={
                "points": n,
                "k": k,
                "mean_kappa": float(kappa.mean()),
                "trusted_normals": self.trust_normals and cloud.normals is not None,
            },
        )
        return cloud.with_channels(normals=normals, variations=kappa)


def annotate_cloud(
    cloud: PointCloud,
    k: int = DEFAULT_NEIGHBORS,
    trust_normals: bool = False,
    pool: WorkerPool = SERIAL_POOL,
) -> PointCloud:
    return SurfaceEstimator(k=k, trust_normals=trust_normals, pool=pool).annotate(cloud)
