"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Raised for invalid configuration or incompatible inputs."""


class EmptyFrameError(ValueError):
    """Raised when an operation needs at least one feature and got none."""


class DegenerateDescriptorError(ValueError):
    """Raised when a descriptor normalizes to the zero vector."""


class FeatureFileError(ValueError):
    """Raised on malformed binary feature files; carries the byte offset."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (byte offset {offset})")
        self.offset = offset


class MapError(ValueError):
    """Raised for malformed or unusable taught maps."""
