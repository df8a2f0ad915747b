"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the model."""


class DivergenceError(ArithmeticError):
    """A quantity is infinite because some link is in certain outage."""


class DegenerateModelWarning(UserWarning):
    """Emitted when a closed form is clamped to stay meaningful."""
