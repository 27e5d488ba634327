"""Exception types shared across the package."""


class CascadeError(Exception):
    """Base class for all package errors."""


class ValidationError(CascadeError):
    """Bad user input: parameters, config fields, malformed addresses."""


class BudgetError(CascadeError):
    """A computation would exceed its configured size or node budget."""

    def __init__(self, message: str, requested=None, budget=None):
        super().__init__(message)
        self.requested = requested
        self.budget = budget


class NoRootError(CascadeError):
    """No root of the mean-sum equation exists in the search range."""


class NotFoundError(CascadeError, LookupError):
    """A referenced edge or vertex is not part of the graph."""


class ConditionError(CascadeError):
    """A structural condition required by the requested computation fails."""


class UnsupportedLawError(CascadeError):
    """The weight law lacks the structure an operation relies on."""


class InsufficientDataError(CascadeError):
    """A statistical fit was asked for with too few usable observations."""

    def __init__(self, message: str, usable=None):
        super().__init__(message)
        self.usable = usable
