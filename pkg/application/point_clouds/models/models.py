import enum
from typing import Optional

from typing_extensions import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from core.types.base import Float64Array

NORMAL_TOLERANCE = 1e-9
MAX_VARIATION = 1.0 / 3.0
VARIATION_TOLERANCE = 1e-12


class CloudFormat(str, enum.Enum):
    PLY_ASCII = "ply-ascii"
    XYZ_TEXT = "xyz-text"

    @classmethod
    def from_path(cls, path: str) -> "CloudFormat":
        """Формат по расширению файла (.ply / всё остальное - xyz)"""
        return cls.PLY_ASCII if path.lower().endswith(".ply") else cls.XYZ_TEXT


class PointCloud(BaseModel):
    """Облако точек с опциональными каналами; неизменяемо после создания"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    points: Float64Array = Field(description="Координаты точек N×3, метры")
    normals: Optional[Float64Array] = Field(
        default=None, description="Единичные нормали N×3"
    )
    variations: Optional[Float64Array] = Field(
        default=None, description="Вариация поверхности κ ∈ [0, 1/3]"
    )
    confidences: Optional[Float64Array] = Field(
        default=None, description="Достоверность измерения φ ∈ (0, 1]"
    )

    @field_validator("points", "normals")
    @classmethod
    def _validate_vectors(cls, v: Optional[np.ndarray]) -> Optional[np.ndarray]:
        if v is None:
            return v
        if v.size == 0:
            v = v.reshape(0, 3)
            v.setflags(write=False)
        if v.ndim != 2 or v.shape[1] != 3:
            raise ValueError(f"Expected an N×3 array, got shape {v.shape}")
        return v

    @field_validator("variations", "confidences")
    @classmethod
    def _validate_scalars(cls, v: Optional[np.ndarray]) -> Optional[np.ndarray]:
        if v is None:
            return v
        if v.ndim != 1:
            raise ValueError(f"Expected a flat array, got shape {v.shape}")
        return v

    @model_validator(mode="after")
    def _validate_channels(self) -> Self:
        n = len(self.points)
        for name in ("normals", "variations", "confidences"):
            channel = getattr(self, name)
            if channel is not None and len(channel) != n:
                raise ValueError(
                    f"Channel {name} has {len(channel)} entries, expected {n}"
                )

        if self.normals is not None and n:
            norms = np.linalg.norm(self.normals, axis=1)
            if np.any(np.abs(norms - 1.0) > NORMAL_TOLERANCE):
                raise ValueError("Normals must have unit length")

        if self.variations is not None and n:
            if np.any(self.variations < 0.0) or np.any(
                self.variations > MAX_VARIATION + VARIATION_TOLERANCE
            ):
                raise ValueError("Surface variations must lie in [0, 1/3]")

        if self.confidences is not None and n:
            if np.any(self.confidences <= 0.0) or np.any(self.confidences > 1.0):
                raise ValueError("Confidences must lie in (0, 1]")
        return self

    def __len__(self) -> int:
        return len(self.points)

    @property
    def has_normals(self) -> bool:
        return self.normals is not None

    @property
    def is_annotated(self) -> bool:
        return self.normals is not None and self.variations is not None

    @classmethod
    def empty(cls) -> "PointCloud":
        return cls(points=np.zeros((0, 3)))

    def with_channels(self, **channels: Optional[np.ndarray]) -> "PointCloud":
        """Новое облако с замененными каналами (с повторной валидацией)"""
        data = {
            "points": self.points,
            "normals": self.normals,
            "variations": self.variations,
            "confidences": self.confidences,
        }
        data.update(channels)
        return PointCloud(**data)

    def subset(self, indices: np.ndarray) -> "PointCloud":
        def pick(channel: Optional[np.ndarray]) -> Optional[np.ndarray]:
            return None if channel is None else channel[indices]

        return PointCloud(
            points=self.points[indices],
            normals=pick(self.normals),
            variations=pick(self.variations),
            confidences=pick(self.confidences),
        )

    def bounding_box(self) -> tuple[np.ndarray, np.ndarray]:
        return self.points.min(axis=0), self.points.max(axis=0)

    def diameter(self) -> float:
        """Диагональ axis-aligned bounding box"""
        if len(self) == 0:
            return 0.0
        lower, upper = self.bounding_box()
        return float(np.linalg.norm(upper - lower))


class LocalSurface(BaseModel):
    """Локальная геометрия поверхности в окрестности точки"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    normal: Float64Array = Field(description="Единичная нормаль")
    variation: float = Field(
        description="κ = λ_min / trace", ge=0.0, le=MAX_VARIATION + VARIATION_TOLERANCE
    )
    neighborhood_size: int = Field(description="Размер окрестности", ge=1)
    degenerate: bool = Field(
        default=False, description="Все соседи совпадают (нулевой след)"
    )


class SurfaceConfig(BaseModel):
    """Параметры оценки локальной поверхности и прореживания"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    k_neighbors: int = Field(default=20, ge=3, description="Размер окрестности k")
    trust_normals: bool = Field(
        default=False, description="Не пересчитывать нормали из файла"
    )
    voxel_size: float = Field(
        default=0.0, ge=0.0, description="Размер вокселя, метры; 0 - без прореживания"
    )
