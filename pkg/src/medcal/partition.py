"""Bucket geometry and log-partition functions over a strike grid.

Strikes K_1 < ... < K_n split the half-line into n+1 buckets: bucket i
spans [K_i, K_{i+1}) with the conventions K_0 = 0 and K_{n+1} = +inf.
For a tilt beta, bucket i's log-partition value is

    c_i(beta) = ln( integral over the bucket of e^{beta x} dx ),

which for a finite bucket with midpoint U_i and half-width V_i reduces to
beta U_i + ln(2 V_i) + ln(sinh(beta V_i)/(beta V_i)).  That single form is
finite at beta = 0 and is the only evaluation path, so there is no
removable-singularity branch to keep consistent.  The last bucket is
infinite and only admits beta < 0:  c_n(beta) = beta K_n - ln(-beta).

Derivatives come out as Langevin expressions:

    c_i'(beta)  = U_i + V_i L(beta V_i)        c_n'(beta)  = K_n - 1/beta
    c_i''(beta) = V_i^2 L'(beta V_i)           c_n''(beta) = 1/beta^2

so inverting c_i' (bucket mean -> tilt) is a scaled Langevin inversion,
with the last bucket closed-form.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, FeasibilityError
from .langevin import DEFAULT_METHOD, InverseMethod, invert, langevin, langevin_prime

__all__ = [
    "StrikeGrid",
    "BucketGeometry",
    "geometry",
    "lsinhc",
    "log_exp_integral",
    "tilted_mean",
    "c",
    "c_prime",
    "c_double_prime",
    "invert_c_prime",
]

_LN2 = float(np.log(2.0))


@dataclass(frozen=True, eq=False)
class StrikeGrid:
    """Immutable strictly increasing strike grid with K_1 > 0."""

    strikes: np.ndarray

    def __post_init__(self):
        arr = np.array(self.strikes, dtype=float, copy=True).reshape(-1)
        if arr.size < 1:
            raise ValueError("StrikeGrid: need at least one strike")
        if not np.all(np.isfinite(arr)):
            raise ValueError("StrikeGrid: strikes must be finite")
        if arr[0] <= 0.0:
            raise ValueError("StrikeGrid: strikes must be positive")
        if np.any(np.diff(arr) <= 0.0):
            raise ValueError("StrikeGrid: strikes must be strictly increasing")
        arr.setflags(write=False)
        object.__setattr__(self, "strikes", arr)

    @property
    def n(self) -> int:
        return int(self.strikes.size)

    @property
    def edges(self) -> np.ndarray:
        """Bucket left edges [0, K_1, ..., K_n] (length n+1)."""
        return np.concatenate(([0.0], self.strikes))

    def left_edge(self, i: int) -> float:
        self._check_bucket(i)
        return 0.0 if i == 0 else float(self.strikes[i - 1])

    def right_edge(self, i: int) -> float:
        """Right edge of bucket i; +inf for the tail bucket."""
        self._check_bucket(i)
        return float(self.strikes[i]) if i < self.n else np.inf

    def _check_bucket(self, i: int) -> None:
        if not 0 <= i <= self.n:
            raise DomainError(f"bucket index {i} outside 0..{self.n}")


@dataclass(frozen=True, eq=False)
class BucketGeometry:
    """Midpoints U_i and half-widths V_i of the n finite buckets."""

    U: np.ndarray
    V: np.ndarray


def geometry(grid: StrikeGrid) -> BucketGeometry:
    """Compute finite-bucket midpoints and half-widths from the grid."""
    edges = grid.edges
    U = 0.5 * (edges[1:] + edges[:-1])
    V = 0.5 * (edges[1:] - edges[:-1])
    U.setflags(write=False)
    V.setflags(write=False)
    return BucketGeometry(U=U, V=V)


def lsinhc(z):
    """ln(sinh(z)/z), stable over the whole line (even; 0 at z = 0).

    |z| < 1e-2 uses log1p on the series z^2/6 + z^4/120; |z| > 700 swaps in
    |z| - ln 2 + log1p(-e^{-2|z|}) - ln|z| since sinh itself overflows.
    """
    z = np.abs(np.asarray(z, dtype=float))
    scalar = z.ndim == 0
    z = np.atleast_1d(z)
    out = np.empty_like(z)

    small = z < 1e-2
    z2 = z[small] * z[small]
    out[small] = np.log1p(z2 / 6.0 + z2 * z2 / 120.0)

    big = z > 700.0
    zb = z[big]
    out[big] = zb - _LN2 + np.log1p(-np.exp(-2.0 * zb)) - np.log(zb)

    mid = ~small & ~big
    zm = z[mid]
    out[mid] = np.log(np.sinh(zm) / zm)

    out = out.reshape(()) if scalar else out
    return out.item() if scalar else out


def log_exp_integral(a: float, b: float, beta: float) -> float:
    """ln of the integral of e^{beta x} over [a, b], 0 <= a < b finite."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return beta * mid + np.log(2.0 * half) + lsinhc(beta * half)


def tilted_mean(a: float, b: float, beta: float) -> float:
    """Mean of the density proportional to e^{beta x} on [a, b]."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return mid + half * langevin(beta * half)


def c(i: int, beta: float, grid: StrikeGrid) -> float:
    """Log-partition value of bucket i at tilt beta.

    The tail bucket (i = n) requires beta < 0; anything else integrates to
    +inf and raises :class:`~medcal.errors.DomainError`.
    """
    grid._check_bucket(i)
    if i == grid.n:
        if beta >= 0.0:
            raise DomainError("c: tail bucket requires beta < 0")
        return beta * grid.left_edge(i) - float(np.log(-beta))
    return float(log_exp_integral(grid.left_edge(i), grid.right_edge(i), beta))


def c_prime(i: int, beta: float, grid: StrikeGrid) -> float:
    """First derivative of c_i: the mean of bucket i under tilt beta."""
    grid._check_bucket(i)
    if i == grid.n:
        if beta >= 0.0:
            raise DomainError("c_prime: tail bucket requires beta < 0")
        return grid.left_edge(i) - 1.0 / beta
    return float(tilted_mean(grid.left_edge(i), grid.right_edge(i), beta))


def c_double_prime(i: int, beta: float, grid: StrikeGrid) -> float:
    """Second derivative of c_i: the variance of bucket i under tilt beta."""
    grid._check_bucket(i)
    if i == grid.n:
        if beta >= 0.0:
            raise DomainError("c_double_prime: tail bucket requires beta < 0")
        return 1.0 / (beta * beta)
    half = 0.5 * (grid.right_edge(i) - grid.left_edge(i))
    return float(half * half * langevin_prime(beta * half))


def invert_c_prime(i: int, kbar: float, grid: StrikeGrid,
                   method: InverseMethod = DEFAULT_METHOD) -> float:
    """Solve c_i'(beta) = kbar for the tilt of bucket i.

    ``kbar`` must lie strictly inside the bucket (strictly above K_n for the
    tail, whose solution is the closed form -1/(kbar - K_n)); otherwise a
    :class:`~medcal.errors.FeasibilityError` names the bucket.
    """
    grid._check_bucket(i)
    left = grid.left_edge(i)
    if i == grid.n:
        if kbar <= left:
            raise FeasibilityError(
                f"bucket {i}: tail mean {kbar} must exceed K_n = {left}",
                bucket=i)
        return -1.0 / (kbar - left)
    right = grid.right_edge(i)
    if not left < kbar < right:
        raise FeasibilityError(
            f"bucket {i}: mean {kbar} outside ({left}, {right})",
            bucket=i)
    mid = 0.5 * (left + right)
    half = 0.5 * (right - left)
    y = (kbar - mid) / half
    return float(invert(y, method)) / half
