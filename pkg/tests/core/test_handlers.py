import io

from application.registration.exceptions import ConvergenceError
from core.errors import EXIT_CONVERGENCE, EXIT_DATA, EXIT_USAGE, UsageError
from core.handlers.handlers import handle_cli_error


class TestHandleCliError:
    def test_usage_error(self):
        stream = io.StringIO()
        assert handle_cli_error(UsageError(message="bad flag"), stream) == EXIT_USAGE
        assert stream.getvalue() == "error[usage_error]: bad flag\n"

    def test_domain_error_keeps_exit_code(self):
        stream = io.StringIO()
        assert handle_cli_error(ConvergenceError(), stream) == EXIT_CONVERGENCE
        assert stream.getvalue().startswith("error[not_converged]")

    def test_unexpected_exception(self):
        stream = io.StringIO()
        assert handle_cli_error(RuntimeError("boom"), stream) == EXIT_DATA
        assert stream.getvalue() == "error[internal_error]: boom\n"
