"""Exception types raised across the package.

Every error derives from :class:`OUAreaError`.  Input problems also derive
from :class:`ValueError` so callers that only catch ``ValueError`` keep
working.  Numerical breakdowns derive from :class:`ArithmeticError`.
"""


class OUAreaError(Exception):
    """Base class for all package errors."""


class InvalidInput(OUAreaError, ValueError):
    """Base class for bad user input."""


class NumericalError(OUAreaError, ArithmeticError):
    """Base class for numerical breakdowns."""


class DimensionMismatch(InvalidInput):
    """Array shapes are inconsistent with each other."""


class InvalidParams(InvalidInput):
    """Parameters outside their admissible range."""


class EmptySample(InvalidInput):
    """A Monte Carlo sample size or grid was empty."""


class ZeroRadius(InvalidInput):
    """Polar coordinates requested at the origin."""


class InvalidInit(InvalidInput):
    """Initial condition is malformed."""


class InvalidBlock(InvalidInput):
    """Block length is not usable for the given sample."""


class ZeroObservable(InvalidInput):
    """The observable has no antisymmetric part."""


class ConfigError(InvalidInput):
    """A configuration, model file or CSV could not be parsed."""


class TooShort(InvalidInput):
    """Trajectory too short for the requested estimator."""


class UnstableDrift(NumericalError):
    """The drift matrix has an eigenvalue with non-positive real part."""


class SingularNoise(NumericalError):
    """The diffusion matrix is (numerically) singular."""


class NumericalFailure(NumericalError):
    """A linear solve or factorization failed."""


class UnstableStep(NumericalError):
    """The Euler step size is too large for the drift."""


class SingularEstimate(NumericalError):
    """An estimated covariance or diffusion matrix is singular."""


class OriginHit(NumericalError):
    """A planar trajectory passed through the origin."""


class DegenerateEccentricity(UserWarning):
    """Zero eccentricity: bounding ellipses coincide, tangency is everywhere.

    Issued as a warning; the geometry is still returned with a flag set.
    """
