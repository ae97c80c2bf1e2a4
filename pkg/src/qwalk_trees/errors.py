"""Exception types shared across the package."""


class CapacityError(ValueError):
    """A size guard was exceeded (too many nodes, too large a matrix)."""


class PoleError(ArithmeticError):
    """An energy coincides with (or is numerically too close to) a resonance.

    Attributes
    ----------
    energy : float
        The offending energy.
    eigenvalue : float or None
        The nearest resonant eigenvalue, when known.
    """

    def __init__(self, message, energy, eigenvalue=None):
        super().__init__(message)
        self.energy = energy
        self.eigenvalue = eigenvalue


class ReductionError(ValueError):
    """A structured reduction was requested for an unsupported input."""


class LocalityError(ValueError):
    """A local-term construction exceeded its bit-support budget."""
