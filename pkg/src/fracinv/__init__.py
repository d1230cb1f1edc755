"""Multinomial Mittag-Leffler evaluation, multi-term fractional mode solutions and
inverse source reconstruction on the torus."""

__version__ = "0.1.0"

from .errors import (AliasingRisk, AllRegimesFailed, ContourViolation, FracInvError,
                     HypothesisViolation, IncompatibleData, NonConvergence,
                     QuadratureDivergence, SmoothnessViolation, SmoothnessWarning,
                     SymbolNotNonnegative)
from .multiml import (ContourSpec, FractionalOrders, MLArguments, MLValue, RegimePolicy,
                      ml_asymptotic, ml_bound_check, ml_contour, ml_eval, ml_eval_many,
                      ml_series)
from .fracode import (SourceTimeProfile, b_coefficient, caputo_l1_residual, mode_homogeneous,
                      mode_solve)
from .spectral import (EllipticSymbol, SpectralField, analyze, mode_list, sobolev_norm,
                       symbol_eval, synthesize)
from .inverse import (FreeCoefficientPolicy, InverseProblem, ReconstructionResult, assemble,
                      check_compatibility, degenerate_cosine_profile, forward, reconstruct_mode,
                      uniqueness_probe)
