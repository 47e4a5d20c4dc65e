"""Exception types raised by the package."""


class InvalidInputError(ValueError):
    """Input violates a documented precondition."""


class UnsupportedDimensionError(InvalidInputError):
    """Operation is only defined for a particular Hilbert-space dimension."""


class CPTPError(InvalidInputError):
    """A would-be channel is not completely positive and trace preserving."""

    def __init__(self, message: str, min_eigenvalue: float | None = None):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
