from application.point_clouds.models.models import (
    CloudFormat,
    LocalSurface,
    PointCloud,
    SurfaceConfig,
    MAX_VARIATION,
)

__all__ = ["CloudFormat", "LocalSurface", "PointCloud", "SurfaceConfig", "MAX_VARIATION"]
