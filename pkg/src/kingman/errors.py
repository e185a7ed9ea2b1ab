"""Exception hierarchy shared by the engines and the CLI."""


class KingmanError(Exception):
    """Base class for every error raised by this package."""


class DomainError(KingmanError, ValueError):
    """An argument lies outside the domain of the operation."""


class DegenerateMeasureError(DomainError):
    """Size-biasing or tilting a measure with zero mean (a point mass at 0)."""


class UsageError(KingmanError, ValueError):
    """Inconsistent arguments: length mismatches, undersized samples, bad counts."""


class ConfigError(UsageError):
    """An experiment configuration failed validation."""


class NumericError(KingmanError, ArithmeticError):
    """A numerical routine failed: lost normalisation, bracket not found, quadrature trouble."""


class NonConvergenceError(NumericError):
    """A backward limit did not settle before the depth cap.

    ``bracket`` holds ``(upper, lower)`` bounds on the condensate mass: the
    monotone mass-at-h sequence at the cap and the trivial lower bound 0.
    """

    def __init__(self, message, depth, mass_gap, bracket):
        super().__init__(message)
        self.depth = depth
        self.mass_gap = mass_gap
        self.bracket = bracket
