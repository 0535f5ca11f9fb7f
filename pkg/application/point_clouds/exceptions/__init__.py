from typing import Optional

from core.errors import BaseError


class PointCloudError(BaseError):
    code = "point_cloud_error"
    message = "Point cloud error"


class CloudFormatError(PointCloudError):
    """Ошибка разбора файла облака; номер строки с 1"""

    code = "cloud_format_error"
    message = "Malformed point cloud file"
    line: Optional[int] = None

    def __init__(self, message: str, line: Optional[int] = None, path: str = ""):
        self.line = line
        location = f"{path}:{line}" if line is not None else path
        super().__init__(
            message=f"{location}: {message}" if location else message,
            details={"path": path, "line": line},
        )


class CloudIOError(PointCloudError):
    code = "cloud_io_error"
    message = "Point cloud file I/O failed"


class CloudChannelError(PointCloudError):
    code = "cloud_channel_error"
    message = "Point cloud channel violates its invariants"


class InvalidVoxelSizeError(PointCloudError):
    code = "invalid_voxel_size"
    message = "Voxel size must be positive"


class EmptyIndexError(PointCloudError):
    code = "empty_index"
    message = "Cannot build a spatial index over zero points"


class NeighborCountError(PointCloudError):
    code = "neighbor_count_error"
    message = "Neighbor count out of range"
