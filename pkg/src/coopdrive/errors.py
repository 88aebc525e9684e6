"""Exception types shared across the package."""


class ContractViolation(ValueError):
    """An operation was called outside its documented contract."""


class ConfigError(ValueError):
    """A configuration file could not be parsed or violates an invariant."""

    def __init__(self, message: str, path: str | None = None):
        super().__init__(message)
        self.path = path
