import logging
import sys
from typing import TextIO

from core.errors import EXIT_DATA, BaseError, ExceptionData

logger = logging.getLogger(__name__)


def handle_cli_error(exc: Exception, stream: TextIO | None = None) -> int:
    """
    Печатает ошибку одной строкой `error[<code>]: <message>` и возвращает код выхода.

    Неожиданные исключения считаются ошибкой данных.
    """
    stream = stream or sys.stderr
    exception_data = ExceptionData.make_exception_data(exc)

    if isinstance(exc, BaseError):
        code, message, exit_code = exc.code, exc.message, exc.exit_code
        details = exc.details
    else:
        code, message, exit_code = "internal_error", str(exc) or type(exc).__name__, EXIT_DATA
        details = None

    stream.write(f"error[{code}]: {message}\n")
    logger.error(
        "Command failed",
        extra={"code": code, "exit_code": exit_code, "details": details, "exc_type": exception_data.exc_type},
    )
    logger.debug("Traceback", extra={"traceback": exception_data.traceback})
    return exit_code
