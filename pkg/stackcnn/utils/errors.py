"""Exception hierarchy shared by the library and the CLI.

Every error carries a human-readable ``detail`` and the process exit code the
CLI should use when it escapes a subcommand: 1 for usage/config problems,
2 for bad input data, 3 for internal invariant violations.
"""

from __future__ import annotations


class StackCnnError(Exception):
    exit_code: int = 3

    def __init__(self, detail: str) -> None:
        super().__init__(detail)
        self.detail = detail


class ConfigError(StackCnnError):
    exit_code = 1


class DataFormatError(StackCnnError):
    exit_code = 2


class EventFormatError(DataFormatError):
    """Malformed event file; ``line`` (CSV) or ``offset`` (binary) locates it."""

    def __init__(
        self,
        detail: str,
        *,
        line: int | None = None,
        offset: int | None = None,
    ) -> None:
        where = ""
        if line is not None:
            where = f" (line {line})"
        elif offset is not None:
            where = f" (byte offset {offset})"
        super().__init__(f"{detail}{where}")
        self.line = line
        self.offset = offset


class DimensionMismatchError(DataFormatError):
    pass


class DegenerateBackgroundError(DataFormatError):
    pass


class InvariantViolation(StackCnnError):
    exit_code = 3


__all__ = [
    "StackCnnError",
    "ConfigError",
    "DataFormatError",
    "EventFormatError",
    "DimensionMismatchError",
    "DegenerateBackgroundError",
    "InvariantViolation",
]
