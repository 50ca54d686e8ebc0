"""Exception types shared across the toolkit."""

from __future__ import annotations


class TglgError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(TglgError, ValueError):
    """A configuration or parameter value is out of its legal range."""


class DataFormatError(TglgError, ValueError):
    """An input file or record does not match the documented schema."""


class PolicyConfigError(TglgError, ValueError):
    """A simulation policy script is malformed (e.g. duplicate triggers)."""


class PolicyProtocolError(TglgError, RuntimeError):
    """A policy returned a decision that is illegal in the current decoder state."""


class EmbeddingTransportError(TglgError, RuntimeError):
    """The remote embedding endpoint could not be reached after retries."""


class EmbeddingProtocolError(TglgError, RuntimeError):
    """The remote embedding endpoint returned a malformed response."""
