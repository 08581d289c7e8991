"""Exception taxonomy for the toolkit.

Every failure mode that a caller can act on gets its own class so the CLI can
map it to an exit code: configuration problems exit 2, mathematical findings
are reported (exit 1), genuine numerical breakdowns raise.
"""


class WedgecheckError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(WedgecheckError):
    """Malformed or inconsistent problem description (CLI exit code 2)."""


class ShapeError(ConfigurationError):
    """Array data with the wrong shape or symmetry for the declared model."""


class WEllipticityError(WedgecheckError):
    """The principal wedge symbol is not invertible where it must be.

    Raised when a construction *requires* w-ellipticity (e.g. the pencil
    reduction needs an invertible leading coefficient).  The condition
    battery reports the same finding without raising.
    """


class WeightLineError(WedgecheckError):
    """Boundary spectrum touches a weight line Im(sigma) = +-1/2."""

    def __init__(self, sigma, distance, tolerance):
        self.sigma = sigma
        self.distance = distance
        self.tolerance = tolerance
        super().__init__(
            "weight_line clearance failed: indicial root sigma = {0} lies "
            "within {1:.3e} of a weight line Im(sigma) = +-1/2 "
            "(tolerance {2:.3e})".format(sigma, distance, tolerance)
        )


class DegenerateSymbolError(WedgecheckError):
    """No spectral gap at infinity: a decay exponent sits on the imaginary axis."""


class ResonanceError(WedgecheckError):
    """A resonant power-series level could not be solved.

    Indicial roots differing by an integer multiple of i couple series
    levels to logarithmic corrections; this is raised when the coupled
    least-squares solve fails its residual check even after raising the
    log degree to its cap.
    """


class ExtractionError(WedgecheckError):
    """Trace extraction could not produce trustworthy coordinates."""


class ContourError(WedgecheckError):
    """A requested contour does not separate the poles it must enclose."""


class ConvergenceError(WedgecheckError):
    """An iterative or refined computation failed its own consistency check."""


class DifferentiationError(WedgecheckError):
    """Finite-difference differentiation of a sampler broke down."""
