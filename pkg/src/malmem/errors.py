"""Exception types shared across the package."""


class MalmemError(Exception):
    """Base class for all package-specific errors."""


class DatasetError(MalmemError):
    """The dataset file is missing, malformed, or fails validation."""


class ConfigError(MalmemError):
    """An experiment configuration is inconsistent or out of range."""


class ModelFormatError(MalmemError):
    """A persisted model document cannot be read back."""


class SchemaMismatchError(MalmemError):
    """Input columns do not match what a trained model expects."""
