"""Exception hierarchy for the calibration library.

Every failure the library can raise derives from :class:`CalibrationError`
so callers can distinguish "this input is bad" from a genuine bug.  The CLI
maps each subclass onto a stable exit code.
"""

from __future__ import annotations


class CalibrationError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(CalibrationError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class QuoteFormatError(CalibrationError, ValueError):
    """A quote file could not be parsed into a quote set."""


class ArbitrageError(CalibrationError, ValueError):
    """Quotes violate a static no-arbitrage condition.

    Carries the full validation report so callers can show every violated
    condition, not only the first one.
    """

    def __init__(self, report):
        self.report = report
        lines = "; ".join(v.message for v in report.violations)
        super().__init__(f"quotes fail no-arbitrage validation: {lines}")


class FeasibilityError(CalibrationError, ValueError):
    """Inputs are arbitrage-consistent but leave the feasible region.

    ``bucket`` names the offending bucket (0-based, bucket i spans
    [K_i, K_{i+1}) with K_0 = 0 and K_{n+1} = +inf).
    """

    def __init__(self, message: str, bucket: int | None = None):
        self.bucket = bucket
        super().__init__(message)


class ConvergenceError(CalibrationError, RuntimeError):
    """An iteration failed to reach its tolerance.

    ``last`` and ``residual`` are set by root finders; ``trace`` and
    ``certificate`` by the entropy maximizer, so a failed run can still be
    inspected and exported.
    """

    def __init__(self, message: str, *, last=None, residual=None,
                 trace=None, certificate=None):
        self.last = last
        self.residual = residual
        self.trace = trace
        self.certificate = certificate
        super().__init__(message)


class VerificationError(CalibrationError, RuntimeError):
    """A debug-mode quadrature cross-check failed on a built density."""
