"""medcal: maximum-entropy density calibration from option quotes.

Calibrates the entropy-maximizing price density consistent with a forward,
call quotes, and (optionally) digital quotes on a strike grid.  With
digitals the density is closed-form up to one scalar Langevin inversion per
bucket; without them, an outer Newton iteration maximizes entropy over the
digitals and stops on a certified bound for the remaining entropy gap.
"""

from .bk import (Certificate, IterationRecord, MaximizeResult, certificate,
                 entropy_gradient, entropy_hessian, entropy_of, feasible_box,
                 init_digitals, maximize_entropy)
from .errors import (ArbitrageError, CalibrationError, ConvergenceError,
                     DomainError, FeasibilityError, QuoteFormatError,
                     VerificationError)
from .langevin import (DEFAULT_METHOD, InverseMethod, inv_bergstrom,
                       inv_exact, inv_pade, inv_rounded_pade, inv_taylor,
                       invert, langevin, langevin_prime)
from .med import (BucketParams, MarketQuotes, PiecewiseExpDensity,
                  ValidationReport, Violation, bucket_masses, bucket_means,
                  build_density, solve_betas, validate_quotes)
from .partition import (BucketGeometry, StrikeGrid, c, c_double_prime,
                        c_prime, geometry, invert_c_prime)
from .quotefile import load_quotes

__version__ = "0.1.0"

__all__ = [
    "ArbitrageError",
    "BucketGeometry",
    "BucketParams",
    "CalibrationError",
    "Certificate",
    "ConvergenceError",
    "DEFAULT_METHOD",
    "DomainError",
    "FeasibilityError",
    "InverseMethod",
    "IterationRecord",
    "MarketQuotes",
    "MaximizeResult",
    "PiecewiseExpDensity",
    "QuoteFormatError",
    "StrikeGrid",
    "ValidationReport",
    "VerificationError",
    "Violation",
    "bucket_masses",
    "bucket_means",
    "build_density",
    "c",
    "c_double_prime",
    "c_prime",
    "certificate",
    "entropy_gradient",
    "entropy_hessian",
    "entropy_of",
    "feasible_box",
    "geometry",
    "init_digitals",
    "inv_bergstrom",
    "inv_exact",
    "inv_pade",
    "inv_rounded_pade",
    "inv_taylor",
    "invert",
    "invert_c_prime",
    "langevin",
    "langevin_prime",
    "load_quotes",
    "maximize_entropy",
    "solve_betas",
    "validate_quotes",
    "__version__",
]
