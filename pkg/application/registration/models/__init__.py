from application.registration.models.transform import (
    RigidTransform,
    Twist,
    project_to_rotation,
)
from application.registration.models.models import (
    CorrespondenceMatrix,
    EmConfig,
    GmmModel,
    ModelConfig,
    MStepResult,
    PrecomputedTerms,
    RegistrationReport,
)

__all__ = [
    "RigidTransform",
    "Twist",
    "project_to_rotation",
    "CorrespondenceMatrix",
    "EmConfig",
    "GmmModel",
    "ModelConfig",
    "MStepResult",
    "PrecomputedTerms",
    "RegistrationReport",
]
