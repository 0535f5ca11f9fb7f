import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from application.registration.exceptions import TransformFormatError
from core.types.base import Float64Array

ORTHONORMAL_TOLERANCE = 1e-9
# Поворот из текста с округлением до ~6 знаков проецируется на SO(3)
TEXT_ROTATION_TOLERANCE = 1e-5
# После стольких композиций поворот проецируется обратно на SO(3)
REORTHONORMALIZE_AFTER = 100

# Вектор se(3): (ω_x, ω_y, ω_z, v_x, v_y, v_z)
Twist = np.ndarray


def project_to_rotation(matrix: np.ndarray) -> np.ndarray:
    """Ближайшая по Фробениусу матрица поворота (SVD)"""
    u, _, vt = np.linalg.svd(matrix)
    rotation = u @ vt
    if np.linalg.det(rotation) < 0.0:
        u[:, -1] *= -1.0
        rotation = u @ vt
    return rotation


class RigidTransform(BaseModel):
    """Элемент SE(3): x ↦ R x + t"""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    rotation: Float64Array = Field(description="Ортонормированная матрица 3×3, det = +1")
    translation: Float64Array = Field(description="Сдвиг, метры")
    chain_length: int = Field(
        default=0,
        ge=0,
        description="Число композиций с последней ортонормализации",
    )

    @field_validator("rotation")
    @classmethod
    def _validate_rotation(cls, v: np.ndarray) -> np.ndarray:
        if v.shape != (3, 3):
            raise ValueError(f"Rotation must be 3×3, got shape {v.shape}")
        if np.linalg.norm(v.T @ v - np.eye(3)) >= ORTHONORMAL_TOLERANCE:
            raise ValueError("Rotation is not orthonormal")
        if np.linalg.det(v) <= 0.0:
            raise ValueError("Rotation must have positive determinant")
        return v

    @field_validator("translation")
    @classmethod
    def _validate_translation(cls, v: np.ndarray) -> np.ndarray:
        if v.size != 3:
            raise ValueError(f"Translation must have 3 entries, got {v.size}")
        v = v.reshape(3)
        v.setflags(write=False)
        return v

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(rotation=np.eye(3), translation=np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "RigidTransform":
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.shape != (4, 4):
            raise ValueError(f"Homogeneous matrix must be 4×4, got {matrix.shape}")
        return cls(rotation=matrix[:3, :3], translation=matrix[:3, 3])

    def matrix(self) -> np.ndarray:
        """Однородная форма g̃ (4×4)"""
        result = np.eye(4)
        result[:3, :3] = self.rotation
        result[:3, 3] = self.translation
        return result

    def compose(self, other: "RigidTransform") -> "RigidTransform":
        """self ∘ other: сначала other, затем self"""
        rotation = self.rotation @ other.rotation
        translation = self.rotation @ other.translation + self.translation
        chain_length = self.chain_length + other.chain_length + 1
        if chain_length > REORTHONORMALIZE_AFTER:
            rotation = project_to_rotation(rotation)
            chain_length = 0
        return RigidTransform(
            rotation=rotation, translation=translation, chain_length=chain_length
        )

    def inverse(self) -> "RigidTransform":
        rotation_t = self.rotation.T
        return RigidTransform(
            rotation=rotation_t,
            translation=-rotation_t @ self.translation,
            chain_length=self.chain_length,
        )

    def apply(self, points: np.ndarray) -> np.ndarray:
        """R p + t для одной точки (3,) или набора (N×3)"""
        points = np.asarray(points, dtype=np.float64)
        return points @ self.rotation.T + self.translation

    def rotation_angle(self) -> float:
        """Угол оси-угла поворота, радианы"""
        skew = self.rotation - self.rotation.T
        sine = 0.5 * np.linalg.norm([skew[2, 1], skew[0, 2], skew[1, 0]])
        cosine = 0.5 * (np.trace(self.rotation) - 1.0)
        return float(np.arctan2(sine, cosine))

    def to_text(self) -> str:
        """4×4 однородная матрица построчно, 16 чисел"""
        rows = self.matrix()
        return "\n".join(" ".join(f"{value:.17g}" for value in row) for row in rows) + "\n"

    @classmethod
    def from_text(cls, text: str, source: str = "") -> "RigidTransform":
        tokens = text.split()
        if len(tokens) != 16:
            raise TransformFormatError(
                message=f"{source}: expected 16 numbers, got {len(tokens)}",
                details={"path": source},
            )
        try:
            matrix = np.array([float(token) for token in tokens]).reshape(4, 4)
        except ValueError as e:
            raise TransformFormatError(message=f"{source}: {e}") from e

        if np.max(np.abs(matrix[3] - [0.0, 0.0, 0.0, 1.0])) > ORTHONORMAL_TOLERANCE:
            raise TransformFormatError(
                message=f"{source}: last row must be 0 0 0 1",
                details={"path": source},
            )
        rotation = matrix[:3, :3]
        deviation = np.linalg.norm(rotation.T @ rotation - np.eye(3))
        if ORTHONORMAL_TOLERANCE <= deviation < TEXT_ROTATION_TOLERANCE and np.linalg.det(rotation) > 0.0:
            matrix[:3, :3] = project_to_rotation(rotation)
        try:
            return cls.from_matrix(matrix)
        except ValueError as e:
            raise TransformFormatError(message=f"{source}: {e}") from e
