"""Tests for the entropy-maximizing outer iteration and its certificates."""

import numpy as np
import pytest

from conftest import (
    continuous_density,
    golden_max,
    make_grid,
    quotes_of,
    random_continuous_density,
    random_feasible_params,
    random_grid,
)
from medcal import (
    MarketQuotes,
    certificate,
    entropy_gradient,
    entropy_hessian,
    entropy_of,
    feasible_box,
    init_digitals,
    maximize_entropy,
    validate_quotes,
)
from medcal.errors import (
    ArbitrageError,
    CalibrationError,
    ConvergenceError,
    FeasibilityError,
)


def single_strike_quotes():
    return MarketQuotes(grid=make_grid([1.0]), forward=0.85,
                        calls=np.array([0.3]))


def collinear_quotes():
    # Three exactly collinear call points (all values dyadic, so the two
    # slopes are -0.25 to the last bit): arbitrage-free but boundary.
    return MarketQuotes(grid=make_grid([1.0, 2.0]), forward=1.0,
                        calls=np.array([0.75, 0.5]))


class TestFeasibleBox:
    def test_single_strike_interval(self):
        lo, hi = feasible_box(single_strike_quotes())
        np.testing.assert_allclose(lo, [0.0])
        np.testing.assert_allclose(hi, [0.55], rtol=1e-15)

    def test_contains_generating_digitals(self):
        rng = np.random.default_rng(41)
        for n in (1, 3, 7):
            src = random_continuous_density(rng, n)
            q = quotes_of(src, with_digitals=False)
            lo, hi = feasible_box(q)
            d = src.implied_digitals()
            assert np.all(lo < d) and np.all(d < hi)

    def test_collinear_calls_infeasible_but_arbitrage_free(self):
        q = collinear_quotes()
        assert validate_quotes(q).ok
        with pytest.raises(FeasibilityError) as err:
            feasible_box(q)
        assert err.value.bucket == 0


class TestInitDigitals:
    def test_single_strike_midpoint(self):
        d = init_digitals(single_strike_quotes())
        np.testing.assert_allclose(d, [0.275], rtol=1e-15)

    def test_second_order_accuracy(self):
        # The centered-slope estimate converges at O(width^2): halving the
        # grid spacing shrinks the worst error about fourfold.
        rng = np.random.default_rng(3)
        errs = {}
        for w in (10.0, 5.0):
            strikes = np.arange(w, 150.0, w)
            beta = list(rng.uniform(-0.04, 0.04, strikes.size)) + [-0.05]
            src = continuous_density(strikes, beta)
            q = quotes_of(src, with_digitals=False)
            errs[w] = np.max(np.abs(init_digitals(q)
                                    - src.implied_digitals()))
            assert errs[w] <= 1e-4 * w ** 2
        assert errs[5.0] < errs[10.0]

    def test_strictly_inside_box(self):
        rng = np.random.default_rng(42)
        for n in (2, 5, 9):
            q = quotes_of(random_continuous_density(rng, n),
                          with_digitals=False)
            lo, hi = feasible_box(q)
            d = init_digitals(q)
            assert np.all(lo < d) and np.all(d < hi)


class TestEntropyGradient:
    def test_zero_at_continuous_density(self):
        # A density with no log jumps at the strikes is a stationary point.
        rng = np.random.default_rng(43)
        for n in (1, 4, 8):
            src = random_continuous_density(rng, n)
            q = quotes_of(src, with_digitals=False)
            g = entropy_gradient(q, src.implied_digitals())
            assert np.max(np.abs(g)) < 1e-9

    def test_matches_log_density_jumps(self):
        rng = np.random.default_rng(44)
        src = random_continuous_density(rng, 4)
        q = quotes_of(src, with_digitals=False)
        d = 0.6 * src.implied_digitals() + 0.4 * init_digitals(q)
        g = entropy_gradient(q, d)
        from medcal import build_density
        dens = build_density(MarketQuotes(grid=q.grid, forward=q.forward,
                                          calls=q.calls, digitals=d),
                             validate=False)
        for j, k in enumerate(q.grid.strikes):
            jump = dens.logpdf(k * (1.0 - 1e-12)) - dens.logpdf(k)
            assert g[j] == pytest.approx(jump, abs=1e-8)

    def test_matches_finite_differences(self):
        rng = np.random.default_rng(45)
        src = random_continuous_density(rng, 5)
        q = quotes_of(src, with_digitals=False)
        d_true = src.implied_digitals()
        d_init = init_digitals(q)
        for t in (0.3, 0.7):
            d = (1.0 - t) * d_true + t * d_init
            g = entropy_gradient(q, d)
            for j in range(d.size):
                h = 1e-6 * max(1.0, abs(d[j]))
                dp, dm = d.copy(), d.copy()
                dp[j] += h
                dm[j] -= h
                fd = (entropy_of(q, dp) - entropy_of(q, dm)) / (2.0 * h)
                denom = max(abs(g[j]), 1e-3)
                assert abs(g[j] - fd) / denom < 1e-5


class TestEntropyHessian:
    def dense_fd_jacobian(self, q, d, step=1e-6):
        n = d.size
        out = np.empty((n, n))
        for j in range(n):
            h = step * max(1.0, abs(d[j]))
            dp, dm = d.copy(), d.copy()
            dp[j] += h
            dm[j] -= h
            out[:, j] = (entropy_gradient(q, dp)
                         - entropy_gradient(q, dm)) / (2.0 * h)
        return out

    def test_matches_dense_jacobian_and_is_tridiagonal(self):
        rng = np.random.default_rng(46)
        src = random_continuous_density(rng, 4)
        q = quotes_of(src, with_digitals=False)
        d = 0.5 * (src.implied_digitals() + init_digitals(q))
        lower, diag, upper = entropy_hessian(q, d)
        dense = self.dense_fd_jacobian(q, d)
        scale = np.max(np.abs(dense))
        np.testing.assert_allclose(diag, np.diagonal(dense),
                                   rtol=1e-4, atol=1e-6 * scale)
        np.testing.assert_allclose(upper[:-1], np.diagonal(dense, 1),
                                   rtol=1e-4, atol=1e-6 * scale)
        np.testing.assert_allclose(lower[1:], np.diagonal(dense, -1),
                                   rtol=1e-4, atol=1e-6 * scale)
        off_band = dense - np.triu(np.tril(dense, 1), -1)
        assert np.max(np.abs(off_band)) <= 1e-8 * max(scale, 1.0)
        assert np.max(np.abs(dense - dense.T)) <= 1e-5 * scale

    def test_negative_definite_at_interior_points(self):
        rng = np.random.default_rng(47)
        for n in (1, 3, 6):
            src = random_continuous_density(rng, n)
            q = quotes_of(src, with_digitals=False)
            d = src.implied_digitals()
            lower, diag, upper = entropy_hessian(q, d)
            mat = np.diag(diag)
            if n > 1:
                mat += np.diag(upper[:-1], 1) + np.diag(lower[1:], -1)
            assert np.all(np.linalg.eigvalsh(mat) < 0.0)

    def test_boundary_point_rejected(self):
        q = quotes_of(random_continuous_density(
            np.random.default_rng(48), 3), with_digitals=False)
        lo, hi = feasible_box(q)
        d = init_digitals(q)
        d[1] = lo[1]
        with pytest.raises(FeasibilityError) as err:
            entropy_hessian(q, d)
        assert err.value.bucket == 1


class TestCertificate:
    def test_single_strike_m1(self):
        grid = make_grid([1.0])
        params = random_feasible_params(np.random.default_rng(49), grid)
        cert = certificate(np.zeros(1), params, grid)
        assert cert.m1 == pytest.approx(2.0, abs=1e-15)

    def test_m2_floor_on_random_iterates(self):
        rng = np.random.default_rng(50)
        for _ in range(60):
            grid = random_grid(rng, int(rng.integers(1, 9)))
            params = random_feasible_params(rng, grid)
            cert = certificate(rng.normal(size=grid.n), params, grid)
            assert cert.m2 >= 0.5 - 1e-12

    def test_zero_gradient_zero_bounds(self):
        grid = make_grid([2.0, 3.0])
        params = random_feasible_params(np.random.default_rng(51), grid)
        cert = certificate(np.zeros(2), params, grid)
        assert cert.grad_norm == 0.0
        assert cert.entropy_gap_bound == 0.0
        assert cert.digital_dist_bound == 0.0
        assert cert.l1_bound == 0.0

    def test_bound_formulas(self):
        grid = make_grid([1.5, 4.0, 9.0])
        params = random_feasible_params(np.random.default_rng(52), grid)
        g = np.array([0.2, -0.1, 0.05])
        cert = certificate(g, params, grid)
        gnorm = np.linalg.norm(g)
        assert cert.m_used == max(cert.m1 + 0.5, cert.m1 + cert.m2)
        assert cert.entropy_gap_bound == \
            pytest.approx(gnorm ** 2 / (2.0 * cert.m_used), rel=1e-15)
        assert cert.digital_dist_bound == \
            pytest.approx(2.0 * gnorm / cert.m_used, rel=1e-15)
        assert cert.l1_bound == \
            pytest.approx(gnorm / np.sqrt(cert.m_used), rel=1e-15)


class TestMaximizeEntropy:
    def test_recovers_continuous_density(self):
        rng = np.random.default_rng(53)
        src = random_continuous_density(rng, 5)
        q = quotes_of(src, with_digitals=False)
        res = maximize_entropy(q, tol=1e-14)
        np.testing.assert_allclose(res.digitals, src.implied_digitals(),
                                   atol=1e-9)
        assert res.density.entropy() == pytest.approx(src.entropy(),
                                                      rel=1e-12)

    def test_trace_semantics(self):
        rng = np.random.default_rng(54)
        src = random_continuous_density(rng, 5)
        q = quotes_of(src, with_digitals=False)
        res = maximize_entropy(q, tol=1e-12)
        assert res.trace[-1].step_type == "converged"
        assert res.trace[-1].step_size == 0.0
        kinds = {r.step_type for r in res.trace[:-1]}
        assert kinds <= {"newton", "damped", "projected-gradient"}
        entropies = np.array([r.entropy for r in res.trace])
        assert np.all(np.diff(entropies) >= -1e-12 * max(1.0,
                                                         abs(entropies[0])))
        assert res.trace[0].entropy == pytest.approx(
            entropy_of(q, init_digitals(q)), rel=1e-15)
        assert res.trace[-1].certificate.entropy_gap_bound <= 1e-12

    def test_dominates_random_probes(self):
        rng = np.random.default_rng(55)
        src = random_continuous_density(rng, 3)
        q = quotes_of(src, with_digitals=False)
        res = maximize_entropy(q, tol=1e-13)
        h_star = res.density.entropy()
        lo, hi = feasible_box(q)
        found = 0
        for _ in range(300):
            if found >= 30:
                break
            d = lo + rng.uniform(0.02, 0.98, lo.size) * (hi - lo)
            try:
                h = entropy_of(q, d)
            except CalibrationError:
                continue
            found += 1
            assert h <= h_star + 1e-12
        assert found >= 30

    def test_single_strike_matches_scalar_search(self):
        q = single_strike_quotes()
        lo, hi = feasible_box(q)
        d_star = golden_max(lambda d: entropy_of(q, [d]),
                            lo[0] + 1e-9, hi[0] - 1e-9)
        res = maximize_entropy(q, tol=1e-14)
        assert res.digitals[0] == pytest.approx(d_star, abs=1e-8)

    def test_max_iter_exhaustion_carries_trace(self):
        rng = np.random.default_rng(56)
        src = random_continuous_density(rng, 5)
        q = quotes_of(src, with_digitals=False)
        with pytest.raises(ConvergenceError) as err:
            maximize_entropy(q, tol=1e-14, max_iter=1)
        assert len(err.value.trace) == 1
        assert err.value.certificate is not None
        assert err.value.certificate.entropy_gap_bound > 1e-14

    def test_input_digitals_ignored(self):
        rng = np.random.default_rng(57)
        src = random_continuous_density(rng, 3)
        q_plain = quotes_of(src, with_digitals=False)
        lo, hi = feasible_box(q_plain)
        q_noisy = MarketQuotes(grid=q_plain.grid, forward=q_plain.forward,
                               calls=q_plain.calls,
                               digitals=0.5 * (lo + hi))
        res_a = maximize_entropy(q_plain, tol=1e-13)
        res_b = maximize_entropy(q_noisy, tol=1e-13)
        np.testing.assert_array_equal(res_a.digitals, res_b.digitals)

    def test_rejects_arbitrage(self):
        q = MarketQuotes(grid=make_grid([1.0, 2.0]), forward=1.0,
                         calls=np.array([0.5, 0.6]))
        with pytest.raises(ArbitrageError):
            maximize_entropy(q)

    def test_collinear_quotes_infeasible(self):
        with pytest.raises(FeasibilityError):
            maximize_entropy(collinear_quotes())
