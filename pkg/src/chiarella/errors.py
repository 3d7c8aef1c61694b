"""Exception types shared across the package.

Every error raised deliberately by this package derives from
:class:`ChiarellaError`, so callers can catch the whole family with one
``except`` clause while still distinguishing configuration problems
(``ValueError`` subclasses) from numerical failures (``RuntimeError``
subclasses).
"""

from __future__ import annotations


class ChiarellaError(Exception):
    """Base class for all errors raised by this package."""


class NoStationaryDistribution(ChiarellaError, ValueError):
    """The linearized dynamics admit no stationary covariance (unstable fixed point)."""


class SingularCovariance(ChiarellaError, ValueError):
    """A covariance matrix required to be invertible is singular or indefinite."""


class NonFiniteSample(ChiarellaError, RuntimeError):
    """A simulated state became NaN or infinite.

    Attributes
    ----------
    step : int
        Global index of the first step at which a non-finite value appeared.
    path : int
        Index of the offending path.
    """

    def __init__(self, step: int, path: int = 0):
        self.step = int(step)
        self.path = int(path)
        super().__init__(f"non-finite state at step {self.step} of path {self.path}")


class QuadratureFailure(ChiarellaError, RuntimeError):
    """Adaptive quadrature did not reach the requested relative accuracy."""


class BracketFailure(ChiarellaError, RuntimeError):
    """A root bracket did not contain a sign change."""


class NoGaussianDensity(ChiarellaError, ValueError):
    """No Gaussian stationary density exists (restoring rate is non-positive)."""


class NoBarrier(ChiarellaError, ValueError):
    """No barrier-crossing timescale exists (the trend feedback is not bistable)."""


class UnsupportedRegime(ChiarellaError, ValueError):
    """An operation was requested for a regime it does not cover."""


class EmptyInput(ChiarellaError, ValueError):
    """An empirical routine received no samples."""


class InsufficientData(ChiarellaError, ValueError):
    """Too few samples for the requested statistical operation."""


class SupportMismatch(ChiarellaError, ValueError):
    """Two densities or histograms live on incompatible supports."""
