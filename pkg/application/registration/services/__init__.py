from application.registration.services.se3 import (
    SE3_BASIS,
    apply,
    basis,
    compose,
    exp_twist,
    hat,
    inverse,
    load_transform,
    save_transform,
    skew,
    vee,
)
from application.registration.services.gmm_model import (
    alpha_coefficient,
    apply_confidence_filter,
    build_model,
    component_normalizer,
    depth_confidence,
    estimate_outlier_weight,
    initial_sigma2,
    inverse_covariance,
    working_volume,
)
from application.registration.services.correspondence import (
    correspondence,
    dump_correspondence,
    naive_correspondence,
    precompute_terms,
    refresh_weights,
)
from application.registration.services.newton_solver import (
    SIGMA2_FLOOR,
    gradient,
    hessian,
    newton_solve,
    objective_q,
    update_sigma2,
)
from application.registration.services.likelihood import negative_log_likelihood
from application.registration.services.registrar import Registrar, register

__all__ = [
    "SE3_BASIS",
    "apply",
    "basis",
    "compose",
    "exp_twist",
    "hat",
    "inverse",
    "load_transform",
    "save_transform",
    "skew",
    "vee",
    "alpha_coefficient",
    "apply_confidence_filter",
    "build_model",
    "component_normalizer",
    "depth_confidence",
    "estimate_outlier_weight",
    "initial_sigma2",
    "inverse_covariance",
    "working_volume",
    "correspondence",
    "dump_correspondence",
    "naive_correspondence",
    "precompute_terms",
    "refresh_weights",
    "SIGMA2_FLOOR",
    "gradient",
    "hessian",
    "newton_solve",
    "objective_q",
    "update_sigma2",
    "negative_log_likelihood",
    "Registrar",
    "register",
]
