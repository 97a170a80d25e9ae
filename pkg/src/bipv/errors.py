"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ``ValidationError`` -> 1,
``BIPVIOError`` -> 2, ``InvariantError`` -> 3.
"""


class BIPVError(Exception):
    """Base class for all package errors."""


class ValidationError(BIPVError, ValueError):
    """Input failed a domain or schema check."""


class InputDomainError(ValidationError):
    """A scalar input lies outside its documented domain."""


class NoCrossingError(ValidationError):
    """The sun never crosses the horizon on the requested date (polar day/night).

    ``sign`` is +1 for polar day (altitude always positive) and -1 for polar night.
    """

    def __init__(self, message: str, sign: int):
        super().__init__(message)
        self.sign = sign


class WindowCollapsedError(ValidationError):
    """Padding consumed the whole daylight window."""


class SunBelowHorizonError(ValidationError):
    """A shadow was requested for an instant with the sun at or below the horizon."""


class WeatherGapError(ValidationError):
    """Weather records do not cover the requested instants.

    ``spans`` lists ``(first_missing, last_missing)`` instant pairs.
    """

    def __init__(self, message: str, spans):
        super().__init__(message)
        self.spans = list(spans)


class BIPVIOError(BIPVError, OSError):
    """A file could not be read, parsed, or written."""


class InvariantError(BIPVError, RuntimeError):
    """An internal consistency check failed."""
