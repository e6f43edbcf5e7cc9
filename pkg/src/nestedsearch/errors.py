"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: validation problems exit 1, numeric
and equilibrium failures exit 2, resource budgets exit 3.
"""


class NestedSearchError(Exception):
    """Base class for all package errors."""


class ValidationError(NestedSearchError, ValueError):
    """Malformed or inconsistent input.

    ``problems`` lists every violation found, not only the first one.
    """

    def __init__(self, message, problems=None):
        self.problems = list(problems or [message])
        super().__init__(message if problems is None else "; ".join(self.problems))


class DomainError(NestedSearchError, ValueError):
    """A numeric operation was asked for outside its domain."""


class UnsupportedOperation(NestedSearchError, TypeError):
    """The operation does not apply to this kind of input (e.g. continuous kernels)."""


class EquilibriumNonexistence(DomainError):
    """The active-search condition behind an equilibrium price fails."""

    def __init__(self, message, **details):
        self.details = details
        super().__init__(message)


class BudgetExceeded(NestedSearchError, RuntimeError):
    def __init__(self, message, estimate=None):
        self.estimate = estimate
        super().__init__(message)
