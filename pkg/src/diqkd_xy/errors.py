"""Exception types shared across the package."""


class DiqkdError(Exception):
    """Base class for all package errors."""


class QuantumSetViolation(DiqkdError):
    """Correlator pair lies outside the quantum set beyond tolerance."""


class InvariantViolation(DiqkdError):
    """A value violates a structural invariant of its type."""


class DomainError(DiqkdError):
    """Argument outside the mathematical domain of an operation."""


class DegenerateInput(DiqkdError):
    """Input hits a degenerate configuration the formula cannot handle."""


class NumericalFailure(DiqkdError):
    """A numerical routine (eigensolver, optimizer) failed to converge."""


class BudgetExceeded(DiqkdError):
    """Search exceeded its configured work budget.

    Carries the loose-but-valid certificate computed so far in
    ``certificate`` when raised by the branch-and-bound engine.
    """

    def __init__(self, message, certificate=None):
        super().__init__(message)
        self.certificate = certificate


class BracketFailure(DiqkdError):
    """Root bracketing failed (e.g. key rate not positive at eta = 1)."""
