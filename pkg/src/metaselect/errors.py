"""Exception types shared across the package."""


class MetaselectError(Exception):
    """Base class for all package-specific errors."""


class MalformedInputError(MetaselectError):
    """A data file could not be parsed; the message names the offending row/column."""


class UnusableDatasetError(MetaselectError):
    """A dataset cannot be used for classification (e.g. only one class)."""


class InsufficientDataError(MetaselectError):
    """Too few samples to fit a model (runtime regression needs at least two)."""


class InfeasibleBudgetError(MetaselectError):
    """No probe plan fits the requested budget (not even a single model)."""


class ContractViolationError(MetaselectError):
    """An internal invariant was broken; maps to CLI exit code 4."""
