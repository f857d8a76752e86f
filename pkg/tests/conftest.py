"""Shared test helpers: synthetic densities, quote sets, and oracles.

Everything here is deterministic given the caller's rng.  The central
construction is ``continuous_density``: a piecewise-exponential density
whose log-density is continuous across every strike.  Such densities are
fixed points of the calls-only calibration (zero log-jumps means zero
entropy gradient), which makes them exact known-answer instances: the
optimizer must recover their digitals, entropy, and shape.
"""

from __future__ import annotations

import numpy as np

from medcal import (
    BucketParams,
    MarketQuotes,
    PiecewiseExpDensity,
    StrikeGrid,
    c,
    c_prime,
)


def make_grid(strikes) -> StrikeGrid:
    return StrikeGrid(np.asarray(strikes, dtype=float))


def density_from_params(grid: StrikeGrid, p, beta, kbar) -> PiecewiseExpDensity:
    """Assemble a density value object from explicit bucket parameters."""
    beta = np.asarray(beta, dtype=float)
    logc = np.array([c(i, float(beta[i]), grid) for i in range(grid.n + 1)])
    params = BucketParams(p=np.asarray(p, dtype=float), beta=beta,
                          kbar=np.asarray(kbar, dtype=float))
    return PiecewiseExpDensity(grid=grid, params=params, logc=logc)


def continuous_density(strikes, beta) -> PiecewiseExpDensity:
    """Piecewise-exponential density with a continuous log-density.

    Bucket i carries exp(a_i + beta_i x) before normalization; continuity
    at K_i forces a_i = a_{i-1} + (beta_{i-1} - beta_i) K_i, and the bucket
    masses follow by normalizing exp(a_i + c_i(beta_i)).
    """
    grid = make_grid(strikes)
    beta = np.asarray(beta, dtype=float)
    n = grid.n
    if beta.size != n + 1 or beta[n] >= 0.0:
        raise ValueError("need n+1 tilts with a negative tail tilt")
    a = np.zeros(n + 1)
    for i in range(1, n + 1):
        a[i] = a[i - 1] + (beta[i - 1] - beta[i]) * grid.strikes[i - 1]
    logc = np.array([c(i, float(beta[i]), grid) for i in range(n + 1)])
    logw = a + logc
    logw -= logw.max()
    p = np.exp(logw)
    p /= p.sum()
    kbar = np.array([c_prime(i, float(beta[i]), grid) for i in range(n + 1)])
    return PiecewiseExpDensity(grid=grid,
                               params=BucketParams(p=p, beta=beta, kbar=kbar),
                               logc=logc)


def quotes_of(density: PiecewiseExpDensity,
              with_digitals: bool = True) -> MarketQuotes:
    """Quote set repriced from a density (closed-form, no quadrature)."""
    return MarketQuotes(grid=density.grid,
                        forward=density.forward(),
                        calls=density.implied_calls(),
                        digitals=density.implied_digitals()
                        if with_digitals else None)


def random_grid(rng: np.random.Generator, n: int,
                lo: float = 40.0, hi: float = 200.0) -> StrikeGrid:
    """Strictly increasing strikes with comfortably separated levels."""
    cuts = np.sort(rng.uniform(lo, hi, size=n))
    while np.min(np.diff(np.concatenate(([0.0], cuts)))) < 1e-3 * hi:
        cuts = np.sort(rng.uniform(lo, hi, size=n))
    return StrikeGrid(cuts)


def random_tilts(rng: np.random.Generator, grid: StrikeGrid,
                 scale: float = 2.0) -> np.ndarray:
    """Tilts with |beta_i V_i| <= scale and a moderate negative tail tilt."""
    widths = np.diff(grid.edges)
    beta = np.empty(grid.n + 1)
    beta[:-1] = rng.uniform(-scale, scale, grid.n) / (0.5 * widths)
    beta[-1] = -rng.uniform(0.5, 2.0) / widths.mean()
    return beta

def random_continuous_density(rng: np.random.Generator, n: int,
                              scale: float = 2.0) -> PiecewiseExpDensity:
    grid = random_grid(rng, n)
    return continuous_density(grid.strikes, random_tilts(rng, grid, scale))


def random_feasible_params(rng: np.random.Generator, grid: StrikeGrid,
                           scale: float = 8.0) -> BucketParams:
    """A feasible iterate's bucket parameters, sampled tilt-first.

    Choosing beta and reading kbar off c' guarantees every mean is strictly
    interior, covering the whole feasible region as the tilt scale grows.
    """
    n = grid.n
    p = 0.5 + rng.uniform(0.0, 1.0, n + 1)
    p /= p.sum()
    beta = random_tilts(rng, grid, scale=rng.uniform(0.1, scale))
    kbar = np.array([c_prime(i, float(beta[i]), grid) for i in range(n + 1)])
    return BucketParams(p=p, beta=beta, kbar=kbar)


def random_feasible_quotes(rng: np.random.Generator, n: int,
                           scale: float = 6.0) -> MarketQuotes:
    """An arbitrage-free quote set with digitals, implied by random params."""
    grid = random_grid(rng, n)
    params = random_feasible_params(rng, grid, scale=scale)
    density = density_from_params(grid, params.p, params.beta, params.kbar)
    return quotes_of(density)


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(64)


def gl_integral(f, a: float, b: float) -> float:
    """64-node Gauss-Legendre integral of f over [a, b]."""
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    return float(half * np.dot(_GL_WEIGHTS, f(mid + half * _GL_NODES)))


def density_mass_gl(density: PiecewiseExpDensity) -> float:
    """Total mass by per-bucket quadrature with an analytic tail integral."""
    edges = density.grid.edges
    n = density.grid.n
    total = sum(gl_integral(density.pdf, edges[i], edges[i + 1])
                for i in range(n))
    # Tail bucket in closed form relative to the sampled part: integrate
    # numerically out to where the exponential is negligible, add the rest.
    beta_n = density.params.beta[n]
    cut = edges[n] + 40.0 / abs(beta_n)
    total += gl_integral(density.pdf, edges[n], cut)
    total += density.pdf(cut) / abs(beta_n)
    return total


def golden_max(f, lo: float, hi: float, tol: float = 1e-6) -> float:
    """Golden-section maximizer with a parabolic polish of the final triple.

    The bracket is narrowed only to ``tol``: past ~1e-7 the function values
    at neighboring probes sink below double rounding noise and the
    comparisons stop carrying information.  The final parabolic fit, whose
    vertex error scales like noise / (tol * curvature), supplies the last
    few digits instead.
    """
    invphi = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    x1 = b - invphi * (b - a)
    x2 = a + invphi * (b - a)
    f1, f2 = f(x1), f(x2)
    while b - a > tol:
        if f1 < f2:
            a, x1, f1 = x1, x2, f2
            x2 = a + invphi * (b - a)
            f2 = f(x2)
        else:
            b, x2, f2 = x2, x1, f1
            x1 = b - invphi * (b - a)
            f1 = f(x1)
    xm = 0.5 * (a + b)
    # One parabolic fit through (a, xm, b) squeezes out the flat-top noise.
    fa, fm, fb = f(a), f(xm), f(b)
    denom = (xm - a) * (fm - fb) - (xm - b) * (fm - fa)
    if denom != 0.0:
        vertex = xm - 0.5 * ((xm - a) ** 2 * (fm - fb)
                             - (xm - b) ** 2 * (fm - fa)) / denom
        if a < vertex < b and np.isfinite(vertex):
            return float(vertex)
    return float(xm)
