"""Error types raised by the store, analytics, service, and simulator.

Every error carries a machine-readable ``code`` (its class name) and the
HTTP status the service layer maps it to.
"""

from __future__ import annotations


class ChainStoryError(Exception):
    """Base class for all domain errors."""

    http_status = 400

    @property
    def code(self) -> str:
        return type(self).__name__


class EmptyBlob(ChainStoryError):
    pass


class EmptyDescription(ChainStoryError):
    pass


class EmptyDisplayName(ChainStoryError):
    pass


class UnknownWorker(ChainStoryError):
    http_status = 404


class EmptySequence(ChainStoryError):
    pass


class UnknownImage(ChainStoryError):
    http_status = 404


class UnknownChain(ChainStoryError):
    http_status = 404


class EmptyExtension(ChainStoryError):
    pass


class PrefixOutOfRange(ChainStoryError):
    pass


class UnknownStory(ChainStoryError):
    http_status = 404


class EmptyBody(ChainStoryError):
    pass


class BodyTooLarge(ChainStoryError):
    http_status = 413


class CrossChainDerivation(ChainStoryError):
    pass


class InsufficientSamples(ChainStoryError):
    pass


class ZeroVariance(ChainStoryError):
    pass


class InvalidProfile(ChainStoryError):
    pass


class Unauthorized(ChainStoryError):
    http_status = 401


class CorruptLog(ChainStoryError):
    """The event log failed validation; the service refuses to start."""

    http_status = 500


class PortInUse(ChainStoryError):
    http_status = 500


class TargetUnreachable(ChainStoryError):
    http_status = 502
