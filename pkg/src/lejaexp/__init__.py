"""Matrix-free exponential integrators with Leja-point interpolation."""
from ._kernels import BACKEND
from .errors import (DegenerateSpectrumError, LejaConvergenceError, LejaDivergenceError,
                     LejaError, NumericalBreakdown, RejectionBudgetExceeded, StepFailure)
from .leja import (ConvergenceReport, LejaSequence, ShiftScale, SpectralBounds, SpectralKind,
                   default_leja, divided_differences, generate_leja_points, leja_exp, leja_phi,
                   leja_phi_nl, load_leja_points, phi, save_leja_points, shift_scale)
from .linops import JacobianAction, RhsOperator, SpectrumCache, jacobian_vector, power_iterate

__version__ = "0.1.0"
