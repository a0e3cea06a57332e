"""Exception types shared across the package."""


class DomainError(ValueError):
    """Evaluation time lies outside the background model's domain."""


class ModelError(ValueError):
    """A background model is internally inconsistent (e.g. non-positive scale factor)."""


class UsageError(ValueError):
    """An operation was called with structurally incompatible inputs."""


class ConfigError(ValueError):
    """A run configuration is invalid."""


class NumericalFailure(RuntimeError):
    """An integration or quadrature failed (step underflow, non-finite state)."""

    def __init__(self, message: str, t: float | None = None, state=None):
        super().__init__(message)
        self.t = t
        self.state = state
