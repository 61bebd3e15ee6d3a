"""Exception hierarchy shared by all modules."""


class StableFisherError(Exception):
    """Base class for every error raised by the package."""


class NonFiniteIntegrand(StableFisherError):
    """An integrand produced inf or nan where the density is positive."""


class TailUnbounded(StableFisherError):
    """An integrand grows too fast for the tail model to integrate it."""


class GridMismatch(StableFisherError):
    """Two objects do not live on compatible grids."""


class NotADensity(StableFisherError):
    """An inversion produced values that are too negative to be clamped."""


class NotIntegrable(StableFisherError):
    """A function on a frequency grid does not decay at the grid edges."""


class ExtremalLaw(StableFisherError):
    """The stable law has beta = +-1 with alpha < 2."""


class FitFailed(StableFisherError):
    """A regression fit did not describe the data well enough."""


class ParseError(StableFisherError):
    """A configuration file could not be parsed."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(StableFisherError):
    """A parsed configuration violates a value constraint."""
