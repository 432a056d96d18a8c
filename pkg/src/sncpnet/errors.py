"""Exception types raised across the package."""


class SncpError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(SncpError, ValueError):
    """A parameter is outside its documented range."""


class InvalidGeometryError(SncpError, ValueError):
    """A geometric argument (edge length, width, ...) is not usable."""


class SupercriticalMuError(InvalidParameterError):
    """The hierarchy radius constant is at or above the percolation threshold."""


class WrongConditionError(SncpError):
    """An operation was called under a density condition it does not support."""


class InfeasibleThinningError(SncpError):
    """The requested thinning intensity exceeds the measured minimum intensity."""

    def __init__(self, phi0, phi_inf):
        self.phi0 = phi0
        self.phi_inf = phi_inf
        super().__init__(
            f"cannot thin to intensity {phi0:.6g}: measured phi_inf is {phi_inf:.6g}"
        )


class NoStripFound(SncpError):
    """No candidate cut strip is empty of nodes and clear of cluster centres."""

    def __init__(self, message, best=None, offending=None):
        self.best = best
        self.offending = offending
        super().__init__(message)


class InvalidPartitionError(SncpError):
    """A squarelet partition places two squarelets at distance zero across the cut."""


class TooFewNodesError(SncpError):
    """Fewer nodes than an operation needs."""


class FitError(SncpError):
    """Not enough usable data points for a regression."""
