"""Exception hierarchy."""


class BubblegramError(Exception):
    """Base class for all errors raised by this package."""


class ArgumentError(BubblegramError, ValueError):
    """Invalid argument or configuration value."""


class DomainError(ArgumentError):
    """Input outside the domain of a physical formula."""


class HypothesisUnsupportedError(BubblegramError):
    """The hypothesised pulse has no support on the analysed samples."""


class DegenerateBasisError(BubblegramError):
    """The (cos, sin) basis Gram matrix is singular or ill-conditioned."""


class NoDetectionError(BubblegramError):
    """A bubblegram holds no supported cell to report."""


class WavError(BubblegramError):
    """Malformed or unsupported WAV file."""
