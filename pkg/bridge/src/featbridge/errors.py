"""Exception types shared across the package."""


class ExtractionError(ValueError):
    """Raised for invalid configuration or unusable extraction inputs."""


class ImageReadError(ExtractionError):
    """Raised when an input image cannot be opened or decoded."""
