"""Maximum-entropy density from call and digital quotes, in closed form.

Given a forward, call quotes C_1..C_n at strikes K_1..K_n, and digital
quotes D_1..D_n, the entropy-maximizing density consistent with all of them
is piecewise exponential on the strike buckets.  The calibration is fully
closed-form given one scalar Langevin inversion per bucket:

  masses   p_0 = 1 - D_1,  p_i = D_i - D_{i+1},  p_n = D_n
  means    kbar_i = K_i + [(C_i - C_{i+1}) - (K_{i+1} - K_i) D_{i+1}] / p_i
           (C_0 = forward, K_0 = 0),  kbar_n = K_n + C_n / p_n
  tilts    beta_i solves c_i'(beta) = kbar_i

and the density on bucket i is p_i exp(beta_i x - c_i(beta_i)).  The mean
formula is the conditional-mean identity

  C_i - C_{i+1} = p_i (kbar_i - K_i) + (K_{i+1} - K_i) D_{i+1},

so bucket means telescope exactly back to the forward.

Feasibility is checked where it bites: masses must be positive and each
mean must fall strictly inside its bucket, otherwise a
:class:`~medcal.errors.FeasibilityError` names the bucket.  Static
no-arbitrage screening is a separate, report-returning step
(:func:`validate_quotes`) so callers can show every violation at once.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ArbitrageError, FeasibilityError, VerificationError
from .langevin import DEFAULT_METHOD, InverseMethod
from .partition import (StrikeGrid, c, geometry, invert_c_prime,
                        log_exp_integral, tilted_mean)

__all__ = [
    "MarketQuotes",
    "Violation",
    "ValidationReport",
    "validate_quotes",
    "bucket_masses",
    "bucket_means",
    "solve_betas",
    "BucketParams",
    "PiecewiseExpDensity",
    "bucket_entropy_term",
    "build_density",
]


def _readonly(arr) -> np.ndarray:
    out = np.array(arr, dtype=float, copy=True).reshape(-1)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class MarketQuotes:
    """A quote set: forward, calls at the grid strikes, optional digitals.

    Construction enforces shape and finiteness only; no-arbitrage
    conditions live in :func:`validate_quotes` so that violating quote sets
    can still be represented and reported on.
    """

    grid: StrikeGrid
    forward: float
    calls: np.ndarray
    digitals: np.ndarray | None = None

    def __post_init__(self):
        calls = _readonly(self.calls)
        if calls.size != self.grid.n:
            raise ValueError(f"expected {self.grid.n} calls, got {calls.size}")
        if not np.all(np.isfinite(calls)):
            raise ValueError("calls must be finite")
        if not np.isfinite(self.forward) or self.forward <= 0.0:
            raise ValueError("forward must be finite and positive")
        object.__setattr__(self, "calls", calls)
        if self.digitals is not None:
            digs = _readonly(self.digitals)
            if digs.size != self.grid.n:
                raise ValueError(f"expected {self.grid.n} digitals, got {digs.size}")
            if not np.all(np.isfinite(digs)):
                raise ValueError("digitals must be finite")
            object.__setattr__(self, "digitals", digs)

    def call_curve(self) -> np.ndarray:
        """Calls extended by the forward at strike 0: [C_0, C_1, ..., C_n]."""
        return np.concatenate(([self.forward], self.calls))

    def slopes(self) -> np.ndarray:
        """Call-curve slopes s_i = (C_{i+1} - C_i)/(K_{i+1} - K_i), i = 0..n-1."""
        curve = self.call_curve()
        edges = self.grid.edges
        return np.diff(curve) / np.diff(edges)


@dataclass(frozen=True)
class Violation:
    """A single failed no-arbitrage condition.

    ``strikes`` lists the offending strike numbers (1-based, matching quote
    files); empty for conditions on the forward alone.
    """

    code: str
    message: str
    strikes: tuple[int, ...] = ()


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violations: tuple[Violation, ...] = field(default=())


def validate_quotes(q: MarketQuotes) -> ValidationReport:
    """Screen a quote set for static arbitrage; returns a report, never raises.

    Checks, with C_0 = forward at K_0 = 0:
      - calls positive and strictly decreasing, forward > C_1
      - all call slopes in (-1, 0) and nondecreasing (convexity)
      - digitals, when present, strictly decreasing within (0, 1)
    """
    bad: list[Violation] = []
    curve = q.call_curve()
    n = q.grid.n

    for j in range(1, n + 1):
        if curve[j] <= 0.0:
            bad.append(Violation("call-positivity",
                                 f"call at strike {j} is not positive",
                                 (j,)))
        if curve[j] >= curve[j - 1]:
            prev = "the forward" if j == 1 else f"strike {j - 1}"
            bad.append(Violation("call-monotonicity",
                                 f"call at strike {j} does not decrease from {prev}",
                                 (j,)))

    slopes = q.slopes()
    if slopes[0] <= -1.0:
        bad.append(Violation("slope-bound",
                             "slope from the forward to strike 1 is <= -1",
                             (1,)))
    for j in range(1, n):
        if slopes[j] < slopes[j - 1]:
            bad.append(Violation("convexity",
                                 f"call slope decreases across strike {j}",
                                 (j, j + 1)))

    if q.digitals is not None:
        d = q.digitals
        for j in range(1, n + 1):
            if not 0.0 < d[j - 1] < 1.0:
                bad.append(Violation("digital-range",
                                     f"digital at strike {j} outside (0, 1)",
                                     (j,)))
            if j >= 2 and d[j - 1] >= d[j - 2]:
                bad.append(Violation("digital-monotonicity",
                                     f"digital at strike {j} does not decrease",
                                     (j,)))

    return ValidationReport(ok=not bad, violations=tuple(bad))


def bucket_masses(digitals) -> np.ndarray:
    """Bucket probabilities from digitals: differences of [1, D_1..D_n, 0].

    Raises :class:`~medcal.errors.FeasibilityError` naming the first bucket
    whose mass is not positive.
    """
    d = np.asarray(digitals, dtype=float).reshape(-1)
    p = -np.diff(np.concatenate(([1.0], d, [0.0])))
    for i, mass in enumerate(p):
        if mass <= 0.0:
            raise FeasibilityError(
                f"bucket {i}: nonpositive mass {mass} from digitals", bucket=i)
    return p


def bucket_means(q: MarketQuotes, p: np.ndarray) -> np.ndarray:
    """Conditional bucket means implied by calls, digitals and masses.

    Each mean must land strictly inside its bucket (strictly above K_n for
    the tail); anything else is outside the feasible region and raises with
    the bucket named.
    """
    if q.digitals is None:
        raise ValueError("bucket_means requires digital quotes")
    n = q.grid.n
    curve = q.call_curve()
    edges = q.grid.edges
    d = q.digitals
    kbar = np.empty(n + 1)
    for i in range(n):
        width = edges[i + 1] - edges[i]
        excess = (curve[i] - curve[i + 1]) - width * d[i]
        kbar[i] = edges[i] + excess / p[i]
        if not edges[i] < kbar[i] < edges[i + 1]:
            raise FeasibilityError(
                f"bucket {i}: implied mean {kbar[i]} outside "
                f"({edges[i]}, {edges[i + 1]})", bucket=i)
    kbar[n] = edges[n] + curve[n] / p[n]
    if kbar[n] <= edges[n]:
        raise FeasibilityError(
            f"bucket {n}: tail mean {kbar[n]} not above K_n", bucket=n)
    return kbar


def solve_betas(kbar, grid: StrikeGrid,
                method: InverseMethod = DEFAULT_METHOD) -> np.ndarray:
    """Per-bucket tilts solving c_i'(beta_i) = kbar_i."""
    kbar = np.asarray(kbar, dtype=float).reshape(-1)
    return np.array([invert_c_prime(i, float(kbar[i]), grid, method)
                     for i in range(grid.n + 1)])


@dataclass(frozen=True, eq=False)
class BucketParams:
    """Calibrated bucket parameters: masses, tilts, means (length n+1)."""

    p: np.ndarray
    beta: np.ndarray
    kbar: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "p", _readonly(self.p))
        object.__setattr__(self, "beta", _readonly(self.beta))
        object.__setattr__(self, "kbar", _readonly(self.kbar))


def bucket_entropy_term(p: float, beta: float, kbar: float, logc: float) -> float:
    """One bucket's contribution p (c - beta kbar - ln p) to the entropy."""
    return p * (logc - beta * kbar - float(np.log(p)))


@dataclass(frozen=True, eq=False)
class PiecewiseExpDensity:
    """Piecewise-exponential density p_i exp(beta_i x - c_i) on buckets.

    Pure value object; pricing and entropy are closed-form reads.
    """

    grid: StrikeGrid
    params: BucketParams
    logc: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "logc", _readonly(self.logc))

    def logpdf(self, x):
        x = np.asarray(x, dtype=float)
        scalar = x.ndim == 0
        x = np.atleast_1d(x)
        idx = np.searchsorted(self.grid.strikes, x, side="right")
        out = (np.log(self.params.p[idx]) + self.params.beta[idx] * x
               - self.logc[idx])
        out[x < 0.0] = -np.inf
        return out.item() if scalar else out

    def pdf(self, x):
        return np.exp(self.logpdf(x))

    def price_digital(self, strike: float) -> float:
        """P(X > strike) under the density."""
        p, beta = self.params.p, self.params.beta
        edges = self.grid.edges
        n = self.grid.n
        if strike <= 0.0:
            return 1.0
        j = int(np.searchsorted(self.grid.strikes, strike, side="right"))
        if j == n:
            return float(p[n] * np.exp(beta[n] * (strike - edges[n])))
        frac_above = np.exp(log_exp_integral(strike, edges[j + 1], beta[j])
                            - self.logc[j])
        return float(p[j] * frac_above + p[j + 1:].sum())

    def price_call(self, strike: float) -> float:
        """E[(X - strike)^+] under the density."""
        p, beta, kbar = self.params.p, self.params.beta, self.params.kbar
        edges = self.grid.edges
        n = self.grid.n
        if strike <= 0.0:
            return float(np.dot(p, kbar) - strike)
        j = int(np.searchsorted(self.grid.strikes, strike, side="right"))
        if j == n:
            mass = p[n] * np.exp(beta[n] * (strike - edges[n]))
            return float(mass * (-1.0 / beta[n]))
        mass = p[j] * np.exp(log_exp_integral(strike, edges[j + 1], beta[j])
                             - self.logc[j])
        mean = tilted_mean(strike, edges[j + 1], beta[j])
        tail = np.dot(p[j + 1:], kbar[j + 1:] - strike)
        return float(mass * (mean - strike) + tail)

    def implied_calls(self) -> np.ndarray:
        return np.array([self.price_call(k) for k in self.grid.strikes])

    def implied_digitals(self) -> np.ndarray:
        return np.array([self.price_digital(k) for k in self.grid.strikes])

    def forward(self) -> float:
        return float(np.dot(self.params.p, self.params.kbar))

    def entropy(self) -> float:
        """Differential entropy -int f ln f, in closed form."""
        p, beta, kbar = self.params.p, self.params.beta, self.params.kbar
        return float(np.sum(p * (self.logc - beta * kbar - np.log(p))))


def build_density(q: MarketQuotes, method: InverseMethod = DEFAULT_METHOD,
                  validate: bool = True, verify: bool = False) -> PiecewiseExpDensity:
    """Calibrate the maximum-entropy density to a full quote set.

    ``validate=False`` skips the static-arbitrage screen (used by the outer
    entropy iteration, which validates once upfront).  ``verify=True`` runs
    quadrature cross-checks on the result (normalization, per-bucket
    log-partition, entropy) and raises
    :class:`~medcal.errors.VerificationError` on disagreement; it is a
    debugging aid, not part of the hot path.
    """
    if q.digitals is None:
        raise ValueError("build_density requires digital quotes; "
                         "calibrate from calls alone with maximize_entropy")
    if validate:
        report = validate_quotes(q)
        if not report.ok:
            raise ArbitrageError(report)
    p = bucket_masses(q.digitals)
    kbar = bucket_means(q, p)
    beta = solve_betas(kbar, q.grid, method)
    logc = np.array([c(i, float(beta[i]), q.grid) for i in range(q.grid.n + 1)])
    density = PiecewiseExpDensity(grid=q.grid,
                                  params=BucketParams(p=p, beta=beta, kbar=kbar),
                                  logc=logc)
    if verify:
        _verify_density(density)
    return density


def _verify_density(d: PiecewiseExpDensity) -> None:
    """Quadrature cross-checks for debug mode; raises VerificationError."""
    from scipy.integrate import quad

    edges = d.grid.edges
    n = d.grid.n
    p, beta = d.params.p, d.params.beta

    total = 0.0
    for i in range(n):
        val, _ = quad(d.pdf, edges[i], edges[i + 1],
                      epsabs=1e-13, epsrel=1e-13)
        total += val
        # Per-bucket log-partition: integral of e^{beta x} against e^{c_i},
        # compared in log space with the tilt recentred to dodge overflow.
        shifted, _ = quad(lambda x, b=beta[i], u=0.5 * (edges[i] + edges[i + 1]):
                          np.exp(b * (x - u)), edges[i], edges[i + 1],
                          epsabs=0.0, epsrel=1e-12)
        lhs = np.log(shifted) + beta[i] * 0.5 * (edges[i] + edges[i + 1])
        if abs(lhs - d.logc[i]) > 1e-9 * max(1.0, abs(d.logc[i])):
            raise VerificationError(
                f"bucket {i}: log-partition mismatch {lhs} vs {d.logc[i]}")
    tail, _ = quad(d.pdf, edges[n], np.inf, epsabs=1e-13, epsrel=1e-13)
    total += tail
    if abs(total - 1.0) > 1e-10:
        raise VerificationError(f"density integrates to {total}, not 1")

    def neg_flogf(x):
        lf = d.logpdf(x)
        return -np.exp(lf) * lf

    h_quad = sum(quad(neg_flogf, edges[i], edges[i + 1],
                      epsabs=1e-12, epsrel=1e-12)[0] for i in range(n))
    h_quad += quad(neg_flogf, edges[n], np.inf, epsabs=1e-12, epsrel=1e-12)[0]
    h = d.entropy()
    if abs(h - h_quad) > 1e-7 * max(1.0, abs(h)):
        raise VerificationError(f"entropy mismatch: closed form {h}, "
                                f"quadrature {h_quad}")
