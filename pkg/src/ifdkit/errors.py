"""Exception hierarchy shared across the package."""


class IFDError(Exception):
    """Base class for every domain error raised by ifdkit."""


class DecodeError(IFDError):
    pass


class ParameterError(IFDError, ValueError):
    pass


class EmptyRegionError(IFDError):
    pass


class SchemaError(IFDError):
    pass


class ConfigError(IFDError):
    pass


class ManifestError(IFDError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class PolicyError(IFDError):
    """A policy backend failed to produce a turn."""


class TransportError(PolicyError):
    pass


class BackendError(PolicyError):
    def __init__(self, message: str, status: int | None = None):
        self.status = status
        super().__init__(message)


class RateLimitError(BackendError):
    pass


class GroupSizeError(IFDError, ValueError):
    pass


class DomainError(IFDError, ValueError):
    pass


class LengthMismatchError(IFDError, ValueError):
    pass
