"""Exception hierarchy shared across the package."""


class AsuflexError(Exception):
    """Base class for all package errors."""


class TankEmptyError(AsuflexError):
    """Evaporation was demanded while the storage tank held no product."""


class NonFiniteError(AsuflexError):
    """A state, loss, or parameter became NaN or infinite."""


class InvalidOverrideError(AsuflexError):
    """A reset override violates a plant state invariant."""


class DimensionMismatchError(AsuflexError):
    """Vector or matrix dimensions do not chain."""


class ParseError(AsuflexError):
    """A price CSV row could not be parsed."""


class GapError(AsuflexError):
    """Price CSV hours are not consecutive integers from 0."""


class ShortProfileError(AsuflexError):
    """A price profile is shorter than one day plus the forecast tail."""


class OutOfRangeError(AsuflexError):
    """A forecast window extends past the end of the profile."""


class MVIndexError(AsuflexError):
    """Manipulated-variable index outside 0..3."""


class RankDeficientError(AsuflexError):
    """System-identification regression is singular."""


class UnstableModelError(AsuflexError):
    """A fitted pole lies on or outside the unit circle."""


class NonConvexError(AsuflexError):
    """The QP Hessian has a negative curvature direction."""


class MaxIterReachedError(AsuflexError):
    """QP solver hit its iteration cap; best iterate available on .solution."""

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class EmptyBufferError(AsuflexError):
    """Replay buffer sampled before any transition was pushed."""


class EpisodeFinishedError(AsuflexError):
    """An environment was stepped after the episode ended."""


class SchemaMismatchError(AsuflexError):
    """A serialized artifact carries an unexpected schema version."""


class CorruptFileError(AsuflexError):
    """A serialized artifact could not be decoded."""


class ConfigError(AsuflexError):
    """Run configuration is invalid or incomplete."""
