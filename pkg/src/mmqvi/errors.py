"""Exception types shared across the package."""


class DomainError(ValueError):
    """A pricing formula was evaluated outside its domain."""


class DataError(ValueError):
    """Input market data violates a format or content assumption."""


class ConfigError(ValueError):
    """A run configuration or model document is invalid."""


class ResourceError(RuntimeError):
    """A requested grid would exceed the memory budget."""


class ArtifactMismatch(RuntimeError):
    """A policy artifact was solved for a different market model."""
