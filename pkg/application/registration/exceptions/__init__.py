from core.errors import BaseError, EXIT_CONVERGENCE


class RegistrationError(BaseError):
    code = "registration_error"
    message = "Registration error"


class InvalidTwistIndexError(RegistrationError):
    code = "invalid_twist_index"
    message = "se(3) basis index must be in 1..6"


class InvalidKappaError(RegistrationError):
    code = "invalid_kappa"
    message = "Surface variation must be positive (pre-clamped)"


class DegenerateTargetError(RegistrationError):
    code = "degenerate_target"
    message = "Target cloud is degenerate"


class EmptyCorrespondenceError(RegistrationError):
    code = "empty_correspondence"
    message = "Correspondence mass vanished for consecutive iterations"


class NonFiniteExponentError(RegistrationError):
    code = "non_finite_exponent"
    message = "Correspondence exponent is not finite after stabilization"


class ZeroConfidenceError(RegistrationError):
    code = "zero_confidence"
    message = "All confidences are zero"


class OutsideWorkingSpaceError(RegistrationError):
    code = "outside_working_space"
    message = "Point has zero density under the mixture"


class ConvergenceError(RegistrationError):
    exit_code = EXIT_CONVERGENCE
    code = "not_converged"
    message = "Registration did not converge"


class TransformFormatError(RegistrationError):
    code = "transform_format_error"
    message = "Malformed transform file"


class TargetNotAnnotatedError(RegistrationError):
    code = "target_not_annotated"
    message = "Target cloud needs normals and surface variations"


class RegistrationIOError(RegistrationError):
    code = "registration_io_error"
    message = "Cannot write registration output"
