"""Exception types shared across the package."""


class SpectralLabError(Exception):
    """Base class for all package-specific errors."""


class TruncationBudgetExceeded(SpectralLabError):
    """A Mercer-series truncation would need more terms than the configured cap.

    Usually means the requested time parameter t is too small for the cap.
    """


class EigensolverFailure(SpectralLabError):
    """The dense symmetric eigensolver did not meet its residual contract."""


class GapTooSmall(SpectralLabError):
    """A spectral gap required by a perturbation bound is numerically zero."""


class NotPositiveDefinite(SpectralLabError):
    """An operation requiring a positive definite matrix received one that is not."""


class DegenerateFit(SpectralLabError):
    """A rate fit was requested on degenerate data (e.g. all abscissae equal)."""


class ConfigError(SpectralLabError):
    """Invalid or unreadable experiment configuration."""
