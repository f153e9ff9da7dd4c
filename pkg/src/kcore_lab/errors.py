"""Exception hierarchy shared by all kcore_lab modules."""


class KCoreError(Exception):
    """Base class for every error raised by kcore_lab."""


class DomainError(KCoreError, ValueError):
    """An argument lies outside the domain of the operation."""


class NoSupercriticalRoot(KCoreError):
    """lambda is at or below the threshold, so no supercritical root exists."""


class StructureError(KCoreError):
    """The requested root structure does not exist for these parameters."""


class ParityError(DomainError):
    """The degree sum is odd, so no perfect matching of half-edges exists."""


class SamplingError(KCoreError):
    """A randomized sampler exceeded its redraw budget."""


class RejectionError(SamplingError):
    def __init__(self, attempts: int, message: str | None = None):
        self.attempts = attempts
        super().__init__(message or f"no simple graph after {attempts} attempts")


class SizeError(DomainError):
    """Input too large for an exhaustive routine."""


class ParseError(KCoreError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + message)


class RangeError(ParseError):
    """A vertex index in an input file is out of range."""
