class ATOError(Exception):
    """Base class for errors raised by this package."""


class ConfigError(ATOError, ValueError):
    """Invalid model or experiment configuration."""


class SizeError(ATOError):
    """An enumeration guard was exceeded."""


class ModelError(ATOError):
    """The model violates an assumption of the requested computation."""
