import logging
from pathlib import Path

import numpy as np

from application.registration.exceptions import (
    InvalidTwistIndexError,
    RegistrationIOError,
    TransformFormatError,
)
from application.registration.models import RigidTransform, Twist

logger = logging.getLogger(__name__)

# Ниже этой нормы ω используется ряд Тейлора второго порядка
SMALL_ANGLE = 1e-8


def _make_basis() -> np.ndarray:
    """
    Базис se(3): E₁..E₃ - генераторы поворота вокруг x, y, z
    (кососимметричный блок 3×3), E₄..E₆ - единичные сдвиги вдоль x, y, z.
    """
    basis = np.zeros((6, 4, 4))
    for axis in range(3):
        basis[axis, :3, :3] = skew(np.eye(3)[axis])
        basis[3 + axis, axis, 3] = 1.0
    basis.setflags(write=False)
    return basis


def skew(w: np.ndarray) -> np.ndarray:
    """[w]×: skew(w) @ p == cross(w, p)"""
    return np.array(
        [
            [0.0, -w[2], w[1]],
            [w[2], 0.0, -w[0]],
            [-w[1], w[0], 0.0],
        ]
    )


SE3_BASIS = _make_basis()


def basis(i: int) -> np.ndarray:
    """E_i, i ∈ 1..6"""
    if not 1 <= i <= 6:
        raise InvalidTwistIndexError(details={"index": i})
    return SE3_BASIS[i - 1].copy()


def hat(xi: Twist) -> np.ndarray:
    """ξ∧ = Σ ξ_i E_i"""
    xi = np.asarray(xi, dtype=np.float64).reshape(6)
    return np.einsum("i,ijk->jk", xi, SE3_BASIS)


def vee(matrix: np.ndarray) -> Twist:
    matrix = np.asarray(matrix, dtype=np.float64)
    return np.array(
        [matrix[2, 1], matrix[0, 2], matrix[1, 0], matrix[0, 3], matrix[1, 3], matrix[2, 3]]
    )


def _exp_coefficients(theta: float, taylor: bool) -> tuple[float, float, float]:
    """Коэффициенты Родрига (a, b) и V-матрицы (c): R = I + aW + bW², V = I + bW + cW²"""
    if taylor:
        theta2 = theta * theta
        return 1.0 - theta2 / 6.0, 0.5 - theta2 / 24.0, 1.0 / 6.0 - theta2 / 120.0
    half_sin = np.sin(0.5 * theta)
    a = np.sin(theta) / theta
    b = 2.0 * half_sin * half_sin / (theta * theta)
    c = (theta - np.sin(theta)) / theta**3
    return a, b, c


def exp_twist(xi: Twist, taylor: bool | None = None) -> RigidTransform:
    """
    Экспонента se(3) → SE(3) в замкнутой форме.

    taylor=None выбирает ветку по ‖ω‖ < SMALL_ANGLE; явное значение
    нужно только для проверки сшивки веток.
    """
    xi = np.asarray(xi, dtype=np.float64).reshape(6)
    omega, v = xi[:3], xi[3:]
    theta = float(np.linalg.norm(omega))
    if taylor is None:
        taylor = theta < SMALL_ANGLE

    w = skew(omega)
    w2 = w @ w
    a, b, c = _exp_coefficients(theta, taylor)
    rotation = np.eye(3) + a * w + b * w2
    v_matrix = np.eye(3) + b * w + c * w2
    return RigidTransform(rotation=rotation, translation=v_matrix @ v)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    return a.compose(b)


def inverse(g: RigidTransform) -> RigidTransform:
    return g.inverse()


def apply(g: RigidTransform, p: np.ndarray) -> np.ndarray:
    return g.apply(p)


def load_transform(path: str | Path) -> RigidTransform:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise TransformFormatError(message=f"Cannot read {path}: {e}") from e
    return RigidTransform.from_text(text, source=str(path))


def save_transform(g: RigidTransform, path: str | Path) -> None:
    path = Path(path)
    try:
        path.write_text(g.to_text(), encoding="utf-8")
    except OSError as e:
        raise RegistrationIOError(message=f"Cannot write {path}: {e}") from e
    logger.debug("Transform saved", extra={"path": str(path)})
