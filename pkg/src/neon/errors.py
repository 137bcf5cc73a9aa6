"""Exception hierarchy shared across the pipeline stages."""

from __future__ import annotations


class NeonError(Exception):
    """Base class for every error raised by this package."""


class MalformedMarkup(NeonError, ValueError):
    """Entity markup is unclosed, nested, overlapping or carries no id."""


class BadDate(NeonError, ValueError):
    """A date string is not a valid YYYYMMDD calendar day."""


class EmptyCorpus(NeonError, ValueError):
    pass


class SubjectNotInChunk(NeonError, ValueError):
    pass


class PairNotInChunk(NeonError, ValueError):
    pass


class DimensionMismatch(NeonError, ValueError):
    pass


class VersionMismatch(NeonError):
    """On-disk datastore does not match the expected format or dimension."""


class MissingPassages(NeonError, ValueError):
    pass


class ParseFailure(NeonError, ValueError):
    """Judge output holds no usable rating object."""


class SeriesTooShort(NeonError, ValueError):
    pass


class ConfigError(NeonError, ValueError):
    pass


class MissingInput(NeonError, FileNotFoundError):
    pass


class ProviderFailure(NeonError):
    """A model provider call failed after all retries."""


class AuthError(ProviderFailure):
    pass


class RateLimited(ProviderFailure):
    pass


class Timeout(ProviderFailure):
    pass


class MalformedResponse(ProviderFailure):
    pass
