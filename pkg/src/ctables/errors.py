"""Exception hierarchy shared across the package."""


class StructuralError(ValueError):
    """Shapes or indices that do not fit the margins they are paired with."""


class ResourceError(RuntimeError):
    """A configured size cap would be exceeded."""


class ExhaustedError(ResourceError):
    """A sampler ran out of attempts before producing the requested output."""

    def __init__(self, message, attempts=0, accepted=0):
        super().__init__(message)
        self.attempts = attempts
        self.accepted = accepted


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap."""

    def __init__(self, message, residual=float("nan"), iterations=0):
        super().__init__(message)
        self.residual = residual
        self.iterations = iterations
