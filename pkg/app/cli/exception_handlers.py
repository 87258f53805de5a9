"""Map toolkit failures onto process exit codes."""
import json
import logging
import sys
from typing import Callable

import pydantic

from app.core.exceptions import (
    ConfigFileError, ConfigurationError, GridCoverageError, InvalidProblemError,
    PresetNotFoundException, ToolkitException, UnsupportedDimensionError
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2

CONFIG_ERRORS = (
    pydantic.ValidationError,
    ConfigurationError,
    ConfigFileError,
    PresetNotFoundException,
    InvalidProblemError,
    GridCoverageError,
    UnsupportedDimensionError,
)


def exit_code_for(exc: BaseException) -> int:
    return EXIT_CONFIG if isinstance(exc, CONFIG_ERRORS) else EXIT_FAILED


def create_error_response(exc: BaseException) -> dict:
    error = {"message": str(exc), "type": type(exc).__name__}
    if isinstance(exc, ToolkitException):
        error["message"] = exc.message
        error["details"] = exc.details
        error["domain"] = getattr(exc, "domain", None)
    elif isinstance(exc, pydantic.ValidationError):
        error["details"] = {"errors": exc.errors(include_url=False)}
    return {"error": error, "exit_code": exit_code_for(exc)}


def run_guarded(command: Callable[[], int]) -> int:
    """Run a command; failures are logged and reported on stderr as JSON."""
    try:
        return command()
    except Exception as exc:
        response = create_error_response(exc)
        logger.error(
            "Command failed",
            extra={"error": response["error"]["message"], "error_type": type(exc).__name__},
            exc_info=response["exit_code"] == EXIT_FAILED,
        )
        print(json.dumps(response, default=str), file=sys.stderr)
        return response["exit_code"]
