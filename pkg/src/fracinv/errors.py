"""Exception types shared across the package."""


class FracInvError(Exception):
    """Base class for all library errors."""


class NonConvergence(FracInvError):
    """Series terms did not start decreasing within the term budget."""


class ContourViolation(FracInvError):
    """Contour parameters or arguments violate the admissibility conditions."""


class QuadratureDivergence(FracInvError):
    """A quadrature result changed by more than its tolerance under refinement."""


class HypothesisViolation(FracInvError):
    """Arguments fall outside the validity range of the asymptotic expansion."""


class AllRegimesFailed(FracInvError):
    """No evaluation regime accepts the given arguments."""


class SymbolNotNonnegative(FracInvError):
    """The operator symbol takes a negative value on the integer lattice."""


class AliasingRisk(FracInvError):
    """The sampling grid is too coarse for the requested frequency cutoff."""


class IncompatibleData(FracInvError):
    """Data violate the solvability condition on a degenerate mode."""

    def __init__(self, message, modes=()):
        super().__init__(message)
        self.modes = list(modes)


class SmoothnessViolation(FracInvError):
    """Data fail the Sobolev regularity hypothesis."""


class SmoothnessWarning(UserWarning):
    """Warning-level counterpart of :class:`SmoothnessViolation`."""
