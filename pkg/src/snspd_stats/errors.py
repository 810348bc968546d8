"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the documented domain of an operation."""


class IntegrationError(RuntimeError):
    """A quadrature run could not produce a trustworthy value."""


class ConsistencyError(RuntimeError):
    """An internal invariant was violated (indicates a bug or bad inputs)."""


class EstimationError(RuntimeError):
    """A statistical estimate could not be formed from the given data."""
