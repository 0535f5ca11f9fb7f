import traceback
from typing import Optional, Any

from pydantic import BaseModel, ConfigDict

# Коды завершения CLI
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_CONVERGENCE = 3


class ExceptionData(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)
    exc: Exception
    exc_type: str
    traceback: str

    @classmethod
    def make_exception_data(cls, exc: Exception) -> "ExceptionData":
        return cls(
            exc=exc,
            exc_type=type(exc).__name__,
            traceback="".join(
                traceback.format_exception(type(exc), exc, exc.__traceback__)
            ),
        )


class BaseError(Exception):
    exit_code: int = EXIT_DATA
    code: str = "base_error"
    message: str = "Base error"
    details: Optional[Any] = None

    def __init__(
        self,
        exit_code: Optional[int] = None,
        code: Optional[str] = None,
        message: Optional[str] = None,
        details: Optional[Any] = None,
    ):
        if exit_code is not None:
            self.exit_code = exit_code
        if code:
            self.code = code
        if message:
            self.message = message
        if details:
            self.details = details
        super().__init__(self.message)


class UsageError(BaseError):
    exit_code = EXIT_USAGE
    code = "usage_error"
    message = "Invalid command line usage"
