"""Entropy maximization over digitals: calibration from calls alone.

With digitals unknown, the maximum-entropy density for calls-only quotes is
found by maximizing the inner problem's entropy H over the feasible digital
vectors.  In the coordinates D_1..D_n the feasible region is an open box:
writing s_i for the call-curve slopes (C_0 = forward at strike 0),

    D_j in (-s_j, -s_{j-1})   for j = 1..n-1,      D_n in (0, -s_{n-1}),

which is nonempty exactly when the call curve is strictly convex, strictly
decreasing, and enters flatter than -1.  H is smooth on the box, its
gradient is the vector of log-density jumps at the strikes,

    dH/dD_j = ln f(K_j^-) - ln f(K_j^+),

and its Hessian is tridiagonal because bucket i's entropy contribution
touches only D_i and D_{i+1}.  The driver runs a damped Newton iteration
(tridiagonal solve, backtracking on H, projected-gradient fallback) and
stops on a convergence certificate rather than a heuristic: with

    m1 = 4 sin^2(pi / (2n + 2)),
    m2 = (1/2) min over buckets of (mean-to-edge gap)^2 / (p_i c_i''),
    m  = max(m1 + 1/2, m1 + m2),

the entropy gap to the optimum is at most |H'|^2 / (2m), the distance to
the optimal digitals at most 2|H'|/m, and the L1 distance between densities
at most |H'|/sqrt(m).  The m2 >= 1/2 floor is the sharpened form: each
per-bucket ratio is at least 1 on the whole feasible region, which reduces
to the pointwise inequality (1 + L(x))^2 >= L'(x) for the Langevin pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArbitrageError, CalibrationError, ConvergenceError, FeasibilityError
from .langevin import DEFAULT_METHOD, InverseMethod
from .med import (MarketQuotes, PiecewiseExpDensity, build_density,
                  validate_quotes)
from .partition import c_double_prime, geometry

__all__ = [
    "OMEGA_MARGIN",
    "Certificate",
    "IterationRecord",
    "MaximizeResult",
    "feasible_box",
    "init_digitals",
    "entropy_of",
    "entropy_gradient",
    "entropy_hessian",
    "certificate",
    "maximize_entropy",
]

# Relative margin by which iterates are kept inside the feasible box.
OMEGA_MARGIN = 1e-6

# Tilts with |beta_i V_i| beyond this are rejected during the line search;
# the density machinery stays finite well past it, but such buckets are
# numerically pointless spikes.
_BETA_CAP = 350.0

_MAX_HALVINGS = 60


@dataclass(frozen=True)
class Certificate:
    """Convergence certificate at one iterate.

    All three bounds are sound upper bounds on the corresponding true
    quantity (gap to the optimal entropy, Euclidean distance to the optimal
    digitals, L1 distance between the densities).
    """

    grad_norm: float
    m1: float
    m2: float
    m_used: float
    entropy_gap_bound: float
    digital_dist_bound: float
    l1_bound: float


@dataclass(frozen=True, eq=False)
class IterationRecord:
    """One solver iterate: the point, its diagnostics, and the step taken."""

    digitals: np.ndarray
    entropy: float
    grad_norm: float
    certificate: Certificate
    step_type: str
    step_size: float


@dataclass(frozen=True, eq=False)
class MaximizeResult:
    digitals: np.ndarray
    density: PiecewiseExpDensity
    trace: tuple[IterationRecord, ...]


def feasible_box(q: MarketQuotes) -> tuple[np.ndarray, np.ndarray]:
    """Open-box bounds (lo, hi) on the digitals D_1..D_n.

    Raises :class:`~medcal.errors.FeasibilityError` when the box is empty,
    which happens exactly when the call quotes touch the arbitrage boundary
    (a linear segment or a flat/inverted pair).
    """
    s = q.slopes()
    n = q.grid.n
    lo = np.empty(n)
    hi = np.empty(n)
    for j in range(1, n + 1):
        lo[j - 1] = -s[j] if j < n else 0.0
        hi[j - 1] = -s[j - 1]
        if not lo[j - 1] < hi[j - 1]:
            raise FeasibilityError(
                f"no interior digital at strike {j}: call quotes sit on the "
                "arbitrage boundary there", bucket=j - 1)
    if hi[0] >= 1.0:
        raise FeasibilityError(
            "slope from the forward to strike 1 is <= -1; no digital below 1 "
            "is feasible", bucket=0)
    return lo, hi


def _clip_to_box(d: np.ndarray, lo: np.ndarray, hi: np.ndarray,
                 margin: float = OMEGA_MARGIN) -> np.ndarray:
    pad = margin * (hi - lo)
    return np.clip(d, lo + pad, hi - pad)


def init_digitals(q: MarketQuotes) -> np.ndarray:
    """Starting digitals from call-curve slopes, shifted strictly inside.

    Interior strikes use the centered slope -(C_{j+1} - C_{j-1}) /
    (K_{j+1} - K_{j-1}), an O(width^2) estimate of the true digital.  The
    last strike starts from the one-sided tail slope -s_{n-1}, which sits
    exactly on the feasible boundary, and subtracts a second-difference
    density correction to land inside at the same order.  n = 1 has no
    differences to take and uses the midpoint of the feasible interval.
    Everything is finally clipped into the box with a relative margin of
    1e-6.
    """
    lo, hi = feasible_box(q)
    n = q.grid.n
    if n == 1:
        return 0.5 * (lo + hi)
    curve = q.call_curve()
    edges = q.grid.edges
    s = q.slopes()
    est = np.empty(n)
    for j in range(1, n):
        est[j - 1] = -(curve[j + 1] - curve[j - 1]) / (edges[j + 1] - edges[j - 1])
    # Tail: density at K_{n-1} from the slope second difference, then walk
    # the tail slope half a bucket to the right.
    f_last = (s[n - 1] - s[n - 2]) / (0.5 * (edges[n] - edges[n - 2]))
    est[n - 1] = -s[n - 1] - 0.5 * (edges[n] - edges[n - 1]) * f_last
    return _clip_to_box(est, lo, hi)


def _with_digitals(q: MarketQuotes, d: np.ndarray) -> MarketQuotes:
    return MarketQuotes(grid=q.grid, forward=q.forward, calls=q.calls,
                        digitals=d)


def entropy_of(q: MarketQuotes, digitals,
               method: InverseMethod = DEFAULT_METHOD) -> float:
    """Entropy of the inner-problem density at the given digitals."""
    d = build_density(_with_digitals(q, np.asarray(digitals, dtype=float)),
                      method=method, validate=False)
    return d.entropy()


def _log_jumps(density: PiecewiseExpDensity) -> np.ndarray:
    """Gradient of H: ln f(K_j^-) - ln f(K_j^+) at each strike."""
    p, beta = density.params.p, density.params.beta
    logc = density.logc
    ks = density.grid.strikes
    left = np.log(p[:-1]) + beta[:-1] * ks - logc[:-1]
    right = np.log(p[1:]) + beta[1:] * ks - logc[1:]
    return left - right


def entropy_gradient(q: MarketQuotes, digitals,
                     method: InverseMethod = DEFAULT_METHOD) -> np.ndarray:
    """dH/dD at a feasible digital vector (log-density jumps at strikes)."""
    d = build_density(_with_digitals(q, np.asarray(digitals, dtype=float)),
                      method=method, validate=False)
    return _log_jumps(d)


def entropy_hessian(q: MarketQuotes, digitals,
                    method: InverseMethod = DEFAULT_METHOD,
                    step: float = 1e-7):
    """Tridiagonal Hessian of H by centered differences of the gradient.

    Returns (lower, diag, upper), each length n (lower[0] = upper[-1] = 0).
    Because column j only touches rows j-1..j+1, perturbing every third
    coordinate at once recovers the full band from three color classes —
    six gradient evaluations regardless of n.  Steps shrink near the box
    walls so probes stay feasible.
    """
    d0 = np.asarray(digitals, dtype=float).copy()
    n = d0.size
    lo, hi = feasible_box(q)
    h = step * np.maximum(1.0, np.abs(d0))
    h = np.minimum(h, 0.25 * (d0 - lo))
    h = np.minimum(h, 0.25 * (hi - d0))
    if np.any(h <= 0.0):
        j = int(np.argmin(h))
        raise FeasibilityError(
            f"digital {j + 1} sits on the feasible boundary; Hessian probe "
            "has no room", bucket=j)

    cols = np.zeros((n, n))
    for color in range(3):
        mask = (np.arange(n) % 3) == color
        if not mask.any():
            continue
        bump = np.where(mask, h, 0.0)
        gp = entropy_gradient(q, d0 + bump, method)
        gm = entropy_gradient(q, d0 - bump, method)
        diff = (gp - gm)
        for j in np.where(mask)[0]:
            rows = slice(max(0, j - 1), min(n, j + 2))
            cols[rows, j] = diff[rows] / (2.0 * h[j])

    lower = np.zeros(n)
    upper = np.zeros(n)
    diag = np.diagonal(cols).copy()
    if n > 1:
        # Symmetrize the off-band: both FD estimates target the same entry.
        off = 0.5 * (np.diagonal(cols, offset=1) + np.diagonal(cols, offset=-1))
        upper[:-1] = off
        lower[1:] = off
    return lower, diag, upper


def certificate(grad, params, grid) -> Certificate:
    """Build the convergence certificate from a gradient and bucket params.

    ``m2`` is the sharpened curvature constant evaluated at the current
    iterate; the bounds use m = max(m1 + 1/2, m1 + m2), which the m2 >= 1/2
    floor makes equal to m1 + m2 up to rounding.
    """
    grad = np.asarray(grad, dtype=float)
    n = grid.n
    edges = grid.edges
    p, beta, kbar = params.p, params.beta, params.kbar
    cpp = np.array([c_double_prime(i, float(beta[i]), grid)
                    for i in range(n + 1)])

    terms = [(edges[1] - kbar[0]) ** 2 / (p[0] * cpp[0])]
    for i in range(1, n):
        terms.append((kbar[i] - edges[i]) ** 2 / (p[i] * cpp[i]))
        terms.append((edges[i + 1] - kbar[i]) ** 2 / (p[i] * cpp[i]))
    terms.append((kbar[n] - edges[n]) ** 2 / (p[n] * cpp[n]))

    m1 = 4.0 * np.sin(np.pi / (2.0 * n + 2.0)) ** 2
    m2 = 0.5 * min(terms)
    m_used = max(m1 + 0.5, m1 + m2)
    gnorm = float(np.linalg.norm(grad))
    return Certificate(grad_norm=gnorm, m1=float(m1), m2=float(m2),
                       m_used=float(m_used),
                       entropy_gap_bound=gnorm ** 2 / (2.0 * m_used),
                       digital_dist_bound=2.0 * gnorm / m_used,
                       l1_bound=gnorm / np.sqrt(m_used))


def _thomas(lower, diag, upper, rhs):
    """Tridiagonal solve without pivoting; returns (x, pivots).

    The pivot sequence doubles as an inertia check: for a symmetric system
    all pivots negative means negative definite.  Returns (None, pivots) if
    a pivot degenerates.
    """
    n = diag.size
    piv = np.empty(n)
    cp = np.empty(n)
    xp = np.empty(n)
    piv[0] = diag[0]
    if piv[0] == 0.0 or not np.isfinite(piv[0]):
        return None, piv[:1]
    cp[0] = upper[0] / piv[0]
    xp[0] = rhs[0] / piv[0]
    for i in range(1, n):
        piv[i] = diag[i] - lower[i] * cp[i - 1]
        if piv[i] == 0.0 or not np.isfinite(piv[i]):
            return None, piv[:i + 1]
        cp[i] = upper[i] / piv[i]
        xp[i] = (rhs[i] - lower[i] * xp[i - 1]) / piv[i]
    x = np.empty(n)
    x[-1] = xp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = xp[i] - cp[i] * x[i + 1]
    return x, piv


def _try_point(q, d, lo, hi, method):
    """Evaluate H and the gradient at d, or None if infeasible/extreme."""
    pad = OMEGA_MARGIN * (hi - lo)
    if np.any(d <= lo + 0.5 * pad) or np.any(d >= hi - 0.5 * pad):
        return None
    try:
        dens = build_density(_with_digitals(q, d), method=method, validate=False)
    except CalibrationError:
        return None
    V = geometry(q.grid).V
    if np.max(np.abs(dens.params.beta[:-1] * V)) > _BETA_CAP:
        return None
    return dens


def maximize_entropy(q: MarketQuotes, tol: float = 1e-10, max_iter: int = 200,
                     method: InverseMethod = DEFAULT_METHOD) -> MaximizeResult:
    """Calibrate the maximum-entropy density from calls alone.

    Damped Newton ascent on H over the feasible digital box, stopping when
    the certified entropy gap drops to ``tol``.  Any digitals on the input
    quote set are ignored.  Returns the optimal digitals, the calibrated
    density, and the per-iterate trace.  Raises
    :class:`~medcal.errors.ConvergenceError` (with the trace and the last
    certificate attached) if ``max_iter`` is exhausted or no ascent step
    can be found.
    """
    report = validate_quotes(MarketQuotes(grid=q.grid, forward=q.forward,
                                          calls=q.calls))
    if not report.ok:
        raise ArbitrageError(report)
    lo, hi = feasible_box(q)
    d = init_digitals(q)
    dens = build_density(_with_digitals(q, d), method=method, validate=False)

    trace: list[IterationRecord] = []

    def record(h, gnorm, cert, step_type, step_size):
        trace.append(IterationRecord(
            digitals=d.copy(), entropy=h, grad_norm=gnorm,
            certificate=cert, step_type=step_type, step_size=step_size))

    def accepts(h_new, g_new, h_old, g_old):
        if h_new > h_old:
            return True
        slack = 1e-13 * max(1.0, abs(h_old))
        return (h_new >= h_old - slack
                and np.linalg.norm(g_new) <= 0.5 * np.linalg.norm(g_old))

    for _ in range(max_iter):
        h = dens.entropy()
        grad = _log_jumps(dens)
        cert = certificate(grad, dens.params, q.grid)
        if cert.entropy_gap_bound <= tol:
            record(h, cert.grad_norm, cert, "converged", 0.0)
            return MaximizeResult(digitals=d.copy(), density=dens,
                                  trace=tuple(trace))

        lo_h, di_h, up_h = entropy_hessian(q, d, method)
        direction = None
        newton, piv = _thomas(lo_h, di_h, up_h, -grad)
        if newton is not None and np.all(piv < 0.0) and np.all(np.isfinite(newton)):
            direction = newton
        step_kind = None
        accepted = None
        if direction is not None:
            alpha = 1.0
            for _ in range(_MAX_HALVINGS):
                cand = _try_point(q, d + alpha * direction, lo, hi, method)
                if cand is not None and accepts(cand.entropy(),
                                                _log_jumps(cand), h, grad):
                    accepted = (d + alpha * direction, cand, alpha,
                                "newton" if alpha == 1.0 else "damped")
                    break
                alpha *= 0.5
        if accepted is None:
            # Projected gradient ascent: step along the gradient, clip into
            # the box, backtrack on H.
            alpha = 0.5 * float(np.min(hi - lo)) / max(cert.grad_norm, 1e-300)
            for _ in range(_MAX_HALVINGS):
                trial = _clip_to_box(d + alpha * grad, lo, hi)
                cand = _try_point(q, trial, lo, hi, method)
                if cand is not None and accepts(cand.entropy(),
                                                _log_jumps(cand), h, grad):
                    accepted = (trial, cand, alpha, "projected-gradient")
                    break
                alpha *= 0.5
        if accepted is None:
            record(h, cert.grad_norm, cert, "stalled", 0.0)
            raise ConvergenceError(
                "maximize_entropy: no ascent step found "
                f"(certified gap {cert.entropy_gap_bound:.3e} > tol {tol:.3e})",
                trace=tuple(trace), certificate=cert)

        record(h, cert.grad_norm, cert, accepted[3], accepted[2])
        d, dens = accepted[0], accepted[1]

    # The point reached by the last step never started an iteration, so it
    # gets no trace record; the exception still carries its certificate.
    grad = _log_jumps(dens)
    cert = certificate(grad, dens.params, q.grid)
    raise ConvergenceError(
        f"maximize_entropy: certified gap {cert.entropy_gap_bound:.3e} "
        f"above tol {tol:.3e} after {max_iter} iterations",
        trace=tuple(trace), certificate=cert)
