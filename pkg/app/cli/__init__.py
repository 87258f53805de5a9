# Command line entry points
from app.cli.commands import build_parser, main
from app.cli.exception_handlers import exit_code_for

__all__ = ["build_parser", "main", "exit_code_for"]
