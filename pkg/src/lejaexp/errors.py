"""Exception types raised by the library."""


class LejaError(ArithmeticError):
    """Base class for interpolation failures; carries the ConvergenceReport."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class LejaConvergenceError(LejaError):
    """Leja nodes exhausted before the increment fell below tolerance."""


class LejaDivergenceError(LejaError):
    """Newton increment exceeded the divergence threshold."""


class DegenerateSpectrumError(ValueError):
    """Spectral bounds collapse to a point, so no shift/scale exists."""


class NumericalBreakdown(ArithmeticError):
    """An iterate vanished (e.g. power iteration hit the zero vector)."""


class StepFailure(RuntimeError):
    """A single integrator step could not be completed at this step size."""

    def __init__(self, message, t=None, dt=None, cause=None, mv_products=0):
        super().__init__(message)
        self.t = t
        self.dt = dt
        self.cause = cause
        self.mv_products = mv_products


class RejectionBudgetExceeded(RuntimeError):
    """Adaptive driver hit its limit of consecutive rejections."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace if trace is not None else []
