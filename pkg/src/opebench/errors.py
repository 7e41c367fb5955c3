"""Exception types shared across the package."""


class ConfigError(ValueError):
    """Raised when an experiment configuration file is malformed or inconsistent."""


class DataError(ValueError):
    """Raised when a dataset (in-memory or on disk) violates its schema."""


class EstimatorError(RuntimeError):
    """Raised when an estimator cannot produce a value for the given inputs."""
