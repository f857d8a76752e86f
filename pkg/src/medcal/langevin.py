"""Langevin function, its derivative, and inverse-function approximations.

The Langevin function

    L(x) = coth(x) - 1/x

is odd, strictly increasing, and maps the real line onto (-1, 1).  It shows
up here because every bucket of a piecewise-exponential density has a mean
that depends on its tilt exactly through L: recovering the tilt from a
bucket mean is a scaled Langevin inversion.  The inverse has no closed form,
so the module ships four printed approximations of increasing quality
(truncated Taylor, a [3/2] Pade, its rounded variant, and Bergstrom's
piecewise tangent formula) plus a safeguarded Newton iteration that serves
as the accuracy reference.

All functions accept scalars or numpy arrays and return matching shapes.
Everything here is pure: no state, no caches.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError, DomainError

__all__ = [
    "SERIES_CUTOFF",
    "InverseMethod",
    "DEFAULT_METHOD",
    "langevin",
    "langevin_prime",
    "inv_taylor",
    "inv_pade",
    "inv_rounded_pade",
    "inv_bergstrom",
    "inv_exact",
    "invert",
]

# Below this |x| the direct formulas lose digits to cancellation and the
# odd/even Taylor series are exact to machine precision.
SERIES_CUTOFF = 1e-2

# Bergstrom's constants, printed to the precision they were published at.
_BERG_A = 1.31446
_BERG_B = 1.58986
_BERG_C = 0.91209
_BERG_SPLIT = 0.84136

# Pade pole: the [3/2] approximant blows up at |y| = sqrt(35/33).
_PADE_POLE = math.sqrt(35.0 / 33.0)

# inv_exact refuses |y| >= 1 - _EXACT_MARGIN: the preimage exceeds ~1e12,
# far outside any meaningful calibration range.
_EXACT_MARGIN = 1e-12


def _as_array(y, name: str):
    """Coerce to a float array, rejecting non-finite input."""
    arr = np.asarray(y, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise DomainError(f"{name}: input must be finite")
    return arr, arr.ndim == 0


def _unwrap(out: np.ndarray, scalar: bool):
    return out.item() if scalar else out


def langevin(x):
    """Evaluate L(x) = coth(x) - 1/x.

    Parameters
    ----------
    x : float or array_like
        Finite real input.

    Returns
    -------
    float or ndarray
        Values in (-1, 1); L(0) = 0.

    Notes
    -----
    For |x| < 1e-2 the odd series x/3 - x^3/45 + 2 x^5/945 is used; the
    direct formula loses ~4 digits there to the coth/1x cancellation while
    the truncated series is accurate to well below 1e-15.
    """
    arr, scalar = _as_array(x, "langevin")
    out = np.empty_like(arr)
    small = np.abs(arr) < SERIES_CUTOFF
    xs = arr[small]
    x2 = xs * xs
    out[small] = xs * (1.0 / 3.0 - x2 / 45.0 + 2.0 * x2 * x2 / 945.0)
    xl = arr[~small]
    out[~small] = 1.0 / np.tanh(xl) - 1.0 / xl
    return _unwrap(out, scalar)


def langevin_prime(x):
    """Evaluate L'(x) = 1/x^2 - 1/sinh(x)^2.

    Returns values in (0, 1/3]; L'(0) = 1/3.  Even series
    1/3 - x^2/15 + 2 x^4/189 below the cutoff; for |x| > 350 the sinh term
    is rewritten as 4 e^{-2|x|} / (1 - e^{-2|x|})^2 to dodge overflow (it
    underflows smoothly to 0, leaving 1/x^2).
    """
    arr, scalar = _as_array(x, "langevin_prime")
    ax = np.abs(arr)
    out = np.empty_like(arr)

    small = ax < SERIES_CUTOFF
    x2 = arr[small] * arr[small]
    out[small] = 1.0 / 3.0 - x2 / 15.0 + 2.0 * x2 * x2 / 189.0

    mid = ~small & (ax <= 350.0)
    xm = arr[mid]
    s = np.sinh(xm)
    out[mid] = 1.0 / (xm * xm) - 1.0 / (s * s)

    big = ax > 350.0
    xb = ax[big]
    t = np.exp(-2.0 * xb)
    out[big] = 1.0 / (xb * xb) - 4.0 * t / np.square(1.0 - t)

    return _unwrap(out, scalar)


_TAYLOR_COEFFS = {1: (3.0,),
                  3: (3.0, 9.0 / 5.0),
                  5: (3.0, 9.0 / 5.0, 297.0 / 175.0),
                  7: (3.0, 9.0 / 5.0, 297.0 / 175.0, 1539.0 / 875.0)}


def inv_taylor(y, order: int = 7):
    """Truncated Taylor inverse 3y + (9/5)y^3 + (297/175)y^5 + (1539/875)y^7.

    ``order`` picks the truncation degree (1, 3, 5 or 7).  Requires |y| < 1.
    Cheap and accurate near 0, poor toward the edges of the range.
    """
    if order not in _TAYLOR_COEFFS:
        raise DomainError(f"inv_taylor: order must be one of 1, 3, 5, 7, got {order!r}")
    arr, scalar = _as_array(y, "inv_taylor")
    if np.any(np.abs(arr) >= 1.0):
        raise DomainError("inv_taylor: |y| must be < 1")
    y2 = arr * arr
    acc = np.zeros_like(arr)
    for coeff in reversed(_TAYLOR_COEFFS[order]):
        acc = acc * y2 + coeff
    return _unwrap(arr * acc, scalar)


def inv_pade(y):
    """[3/2] Pade inverse  y (3 - (36/35) y^2) / (1 - (33/35) y^2).

    Defined up to the approximant's own pole at |y| = sqrt(35/33) ~ 1.0298,
    slightly beyond the true range of L.
    """
    arr, scalar = _as_array(y, "inv_pade")
    if np.any(np.abs(arr) >= _PADE_POLE):
        raise DomainError("inv_pade: |y| must be < sqrt(35/33)")
    y2 = arr * arr
    out = arr * (3.0 - (36.0 / 35.0) * y2) / (1.0 - (33.0 / 35.0) * y2)
    return _unwrap(out, scalar)


def inv_rounded_pade(y):
    """Rounded Pade inverse  y (3 - y^2) / (1 - y^2), for |y| < 1.

    Coefficient-rounded variant of :func:`inv_pade` whose pole coincides
    with the edge of the range, so it diverges where the true inverse does.
    """
    arr, scalar = _as_array(y, "inv_rounded_pade")
    if np.any(np.abs(arr) >= 1.0):
        raise DomainError("inv_rounded_pade: |y| must be < 1")
    y2 = arr * arr
    return _unwrap(arr * (3.0 - y2) / (1.0 - y2), scalar)


def inv_bergstrom(y):
    """Bergstrom's piecewise inverse, the default production seed.

    For |y| < 0.84136:  1.31446 tan(1.58986 y) + 0.91209 y,
    otherwise (up to |y| < 1):  1 / (sign(y) - y).

    The boundary point uses the outer branch; the two branches differ by
    under 1e-2 there, and the quoted relative accuracy is 6.4e-4 over the
    whole range.
    """
    arr, scalar = _as_array(y, "inv_bergstrom")
    if np.any(np.abs(arr) >= 1.0):
        raise DomainError("inv_bergstrom: |y| must be < 1")
    out = np.empty_like(arr)
    inner = np.abs(arr) < _BERG_SPLIT
    yi = arr[inner]
    out[inner] = _BERG_A * np.tan(_BERG_B * yi) + _BERG_C * yi
    yo = arr[~inner]
    out[~inner] = 1.0 / (np.sign(yo) - yo)
    return _unwrap(out, scalar)


def _bisect_inverse(y: float, tol: float, max_iter: int) -> float:
    """Safeguarded fallback: bracket on |y|, bisect, restore sign."""
    sign = 1.0 if y >= 0 else -1.0
    target = abs(y)
    hi = max(1.0, 2.0 * abs(inv_bergstrom(target)))
    while langevin(hi) < target:
        hi *= 2.0
    lo = 0.0
    x = 0.5 * hi
    for _ in range(max(200, max_iter)):
        r = langevin(x) - target
        if abs(r) <= tol:
            return sign * x
        if r < 0:
            lo = x
        else:
            hi = x
        x = 0.5 * (lo + hi)
    raise ConvergenceError("inv_exact: bisection stalled",
                           last=sign * x, residual=langevin(x) - target)


def inv_exact(y, tol: float = 1e-14, max_iter: int = 50):
    """Invert L to a residual tolerance: returns x with |L(x) - y| <= tol.

    Newton iteration seeded by :func:`inv_bergstrom`.  Steps that leave the
    sign-consistent half-line or fail to shrink the residual reroute that
    element to a bracketing bisection.  Rejects |y| >= 1 - 1e-12 (the
    preimage is astronomically large) and raises
    :class:`~medcal.errors.ConvergenceError` carrying the last iterate and
    residual if the budget runs out.
    """
    arr, scalar = _as_array(y, "inv_exact")
    if np.any(np.abs(arr) >= 1.0 - _EXACT_MARGIN):
        raise DomainError("inv_exact: |y| must be < 1 - 1e-12")

    x = np.atleast_1d(np.asarray(inv_bergstrom(arr), dtype=float)).copy()
    flat_y = np.atleast_1d(arr)
    resid = langevin(x) - flat_y
    bad = np.zeros(x.shape, dtype=bool)

    for _ in range(max_iter):
        active = (np.abs(resid) > tol) & ~bad
        if not active.any():
            break
        xa = x[active]
        step = resid[active] / langevin_prime(xa)
        xn = xa - step
        rn = langevin(xn) - flat_y[active]
        # Reject sign flips and residual growth; those go to bisection.
        ok = (np.sign(xn) == np.sign(flat_y[active])) | (flat_y[active] == 0.0)
        ok &= np.abs(rn) < np.abs(resid[active])
        ok &= np.isfinite(xn)
        upd = x[active]
        upd[ok] = xn[ok]
        x[active] = upd
        rupd = resid[active]
        rupd[ok] = rn[ok]
        resid[active] = rupd
        misbehaved = np.where(active)[0][~ok]
        bad[misbehaved] = True

    for idx in np.where(bad)[0]:
        x[idx] = _bisect_inverse(float(flat_y[idx]), tol, max_iter)
        resid[idx] = langevin(x[idx]) - flat_y[idx]

    if np.any(np.abs(resid) > tol):
        worst = int(np.argmax(np.abs(resid)))
        raise ConvergenceError(
            f"inv_exact: no convergence after {max_iter} iterations",
            last=float(x[worst]), residual=float(resid[worst]))
    out = x.reshape(np.shape(arr))
    return _unwrap(out, scalar)


_POLISH_STEPS = 2


def _inv_polished(y):
    """Bergstrom seed refined by two Newton steps; the production default."""
    arr, scalar = _as_array(y, "invert")
    x = np.asarray(inv_bergstrom(arr), dtype=float)
    for _ in range(_POLISH_STEPS):
        x = x - (langevin(x) - arr) / langevin_prime(x)
    return _unwrap(np.asarray(x), scalar)


_KINDS = ("taylor", "pade", "rounded_pade", "bergstrom", "exact", "polished")


@dataclass(frozen=True)
class InverseMethod:
    """Tagged choice of inverse-Langevin algorithm.

    ``kind`` is one of 'taylor', 'pade', 'rounded_pade', 'bergstrom',
    'exact', 'polished'.  ``order`` applies to taylor; ``tol`` and
    ``max_iter`` to exact.  Use the classmethod constructors rather than
    spelling the fields out.
    """

    kind: str = "polished"
    order: int = 7
    tol: float = 1e-14
    max_iter: int = 50

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown inverse method {self.kind!r}")

    @classmethod
    def taylor(cls, order: int = 7) -> "InverseMethod":
        return cls(kind="taylor", order=order)

    @classmethod
    def pade(cls) -> "InverseMethod":
        return cls(kind="pade")

    @classmethod
    def rounded_pade(cls) -> "InverseMethod":
        return cls(kind="rounded_pade")

    @classmethod
    def bergstrom(cls) -> "InverseMethod":
        return cls(kind="bergstrom")

    @classmethod
    def exact(cls, tol: float = 1e-14, max_iter: int = 50) -> "InverseMethod":
        return cls(kind="exact", tol=tol, max_iter=max_iter)

    @classmethod
    def polished(cls) -> "InverseMethod":
        return cls(kind="polished")

    @classmethod
    def from_name(cls, name: str) -> "InverseMethod":
        """Parse a CLI token such as 'rounded-pade' or 'exact'."""
        key = name.strip().lower().replace("-", "_")
        if key not in _KINDS:
            raise DomainError(f"unknown inverse method {name!r}")
        return cls(kind=key)


DEFAULT_METHOD = InverseMethod.polished()


def invert(y, method: InverseMethod = DEFAULT_METHOD):
    """Invert the Langevin function with the chosen method."""
    if method.kind == "taylor":
        return inv_taylor(y, method.order)
    if method.kind == "pade":
        return inv_pade(y)
    if method.kind == "rounded_pade":
        return inv_rounded_pade(y)
    if method.kind == "bergstrom":
        return inv_bergstrom(y)
    if method.kind == "exact":
        return inv_exact(y, method.tol, method.max_iter)
    return _inv_polished(y)
