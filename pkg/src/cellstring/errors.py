"""Exception types shared across the package."""


class CellstringError(ValueError):
    """Base class for all argument/state errors raised by this package."""


class DomainError(CellstringError):
    """An argument or state value is outside its documented domain."""


class ConfigError(CellstringError):
    """A configuration object or file is internally inconsistent."""


class NumericError(CellstringError):
    """A numeric input is NaN/inf where a finite value is required."""


class TelemetryError(CellstringError):
    """A telemetry stream or file violates its format contract.

    The message carries position context (file line or sample index).
    """
