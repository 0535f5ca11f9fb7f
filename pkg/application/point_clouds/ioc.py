from typing_extensions import Self

from dishka import Provider, Scope, from_context, provide

from application.point_clouds.models import SurfaceConfig
from application.point_clouds.services import SurfaceEstimator
from core.workers import WorkerPool


class PointCloudsDepsProvider(Provider):
    surface_config = from_context(provides=SurfaceConfig, scope=Scope.REQUEST)

    @provide(scope=Scope.REQUEST)
    def get_surface_estimator(
        self: Self, config: SurfaceConfig, pool: WorkerPool
    ) -> SurfaceEstimator:
        return SurfaceEstimator(
            k=config.k_neighbors, trust_normals=config.trust_normals, pool=pool
        )
