class SelfSimError(Exception):
    """
    Base class for all domain errors.

    Each error knows how it surfaces:
    - exit_code: process exit status used by the CLI
    - http_status: status code used by the HTTP layer
    """
    exit_code = 2
    http_status = 422


class DimensionMismatch(SelfSimError):
    pass


class ValidationFailed(SelfSimError):
    """An IFS (or other input) failed one or more named invariants."""

    def __init__(self, failures: list[str], message: str | None = None):
        self.failures = list(failures)
        super().__init__(message or "failed invariants: " + ", ".join(self.failures))


class NonContractive(SelfSimError):
    pass


class FrequencyTooSmall(SelfSimError):
    pass


class RealEigenvalue(SelfSimError):
    pass


class IllConditioned(SelfSimError):
    pass


class SingularDigits(SelfSimError):
    pass


class DegenerateTrace(SelfSimError, ZeroDivisionError):
    """Division by a vanishing norm ‖L_n‖ (or |B_n|)."""


class DegenerateFit(SelfSimError):
    pass


class NoConvergence(SelfSimError):
    pass


class OutOfDomain(SelfSimError):
    pass


class Undecided(SelfSimError):
    pass


class IfsFileError(SelfSimError):
    pass


class CapExceeded(SelfSimError):
    exit_code = 3
    http_status = 413


class BudgetExceeded(SelfSimError):
    exit_code = 3
    http_status = 413

    def __init__(self, message: str, nodes: int = 0):
        self.nodes = nodes
        super().__init__(message)
