"""
Exception hierarchy shared by the core modules, the service and the CLI.
"""


class FreeActionError(Exception):
    """Base class for every error raised by free-actions."""

    exit_code = 1


class ConfigError(FreeActionError, ValueError):
    exit_code = 2


class PairFormatError(FreeActionError, ValueError):
    exit_code = 2


class ElementNotInStructure(FreeActionError, KeyError):
    exit_code = 2

    def __str__(self) -> str:
        return Exception.__str__(self)


class ArityMismatch(FreeActionError, ValueError):
    exit_code = 2


class InconsistentDemand(FreeActionError, ValueError):
    exit_code = 2


class UncertifiedInput(FreeActionError):
    pass


class AclIndeterminate(FreeActionError):
    pass


class NotFreeError(FreeActionError):
    pass


class InvariantViolation(FreeActionError):
    pass


class NonConvergence(FreeActionError):
    pass


class ResourceLimitExceeded(FreeActionError):
    exit_code = 3


class SearchBudgetExhausted(ResourceLimitExceeded):
    pass


def exit_code_for(error: BaseException) -> int:
    """Map an exception to the CLI exit code (0 pass, 1 check, 2 usage, 3 budget)."""
    if isinstance(error, FreeActionError):
        return error.exit_code
    return 1
