"""Monte Carlo, importance sampling, exact references, and slope fits."""

import math

import mpmath
import numpy as np
import pytest
from scipy import integrate

import gaussmax as gm

STANDARD2 = gm.GaussianModel(np.zeros(2), gm.build_covariance(np.eye(2)))
STANDARD1 = gm.GaussianModel(np.zeros(1), gm.build_covariance(np.eye(1)))


def mp_union(q, n):
    return 1 - (1 - mpmath.mpf(q)) ** n


def mp_block_pair(sigma_diag, corner, a_n, n):
    """High-precision mirror of the exact block formulas."""
    with mpmath.workdps(60):
        qs = [
            mpmath.ncdf(-mpmath.mpf(a_n) * mpmath.mpf(c) / mpmath.sqrt(mpmath.mpf(s)))
            for s, c in zip(sigma_diag, corner)
        ]
        cw = mpmath.mpf(1)
        for q in qs:
            cw *= 1 - (1 - q) ** n
        prod_q = mpmath.mpf(1)
        for q in qs:
            prod_q *= q
        alo = 1 - (1 - prod_q) ** n
        return cw, alo


def gauss_tail(t):
    """Upper tail of the standard normal by well-scaled quadrature."""
    factor, err = integrate.quad(
        lambda s: math.exp(-t * s - 0.5 * s * s), 0.0, np.inf, epsabs=1e-14, epsrel=1e-12
    )
    assert err < 1e-10 * factor
    return math.exp(-0.5 * t * t) / math.sqrt(2.0 * math.pi) * factor


class TestUnionCombine:
    def test_endpoints(self):
        assert gm.union_combine(0.0, 50) == 0.0
        assert gm.union_combine(1.0, 50) == 1.0
        assert gm.union_combine(0.37, 1) == pytest.approx(0.37, abs=1e-16)

    def test_known_value(self):
        assert gm.union_combine(1e-3, 1000) == pytest.approx(
            0.6323045752290359, rel=1e-14
        )

    def test_tiny_q_against_mpmath(self):
        with mpmath.workdps(60):
            for q, n in [(1e-10, 1000), (1e-15, 10**6), (1e-3, 10)]:
                ours = gm.union_combine(q, n)
                ref = float(mp_union(q, n))
                assert abs(ours - ref) <= 1e-12 * ref

    def test_monotone_in_q_and_n(self):
        qs = [0.0, 1e-8, 1e-4, 1e-2, 0.5, 0.9, 1.0]
        vals = [gm.union_combine(q, 100) for q in qs]
        assert all(a <= b for a, b in zip(vals, vals[1:]))
        ns = [1, 2, 10, 100, 10**6]
        vals = [gm.union_combine(1e-4, n) for n in ns]
        assert all(a <= b for a, b in zip(vals, vals[1:]))

    def test_domain_errors(self):
        with pytest.raises(ValueError):
            gm.union_combine(-0.1, 10)
        with pytest.raises(ValueError):
            gm.union_combine(1.1, 10)
        with pytest.raises(ValueError):
            gm.union_combine(0.5, 0)


class TestExactBlockDiagonal:
    def test_worked_example(self):
        a_n = math.sqrt(2.0 * math.log(1e6))
        cw, alo = gm.exact_block_diagonal([1.0, 1.0], [1.2, 1.2], a_n, 10**6)
        ref_cw, ref_alo = mp_block_pair([1.0, 1.0], [1.2, 1.2], a_n, 10**6)
        assert cw == pytest.approx(float(ref_cw), rel=1e-12)
        assert alo == pytest.approx(float(ref_alo), rel=1e-12)
        # The two event probabilities separate by a factor close to n.
        assert cw / alo == pytest.approx(1e6, rel=2e-2)

    def test_one_dimension_events_coincide(self):
        cw, alo = gm.exact_block_diagonal([2.0], [1.5], 3.0, 500)
        assert cw == alo

    def test_single_draw_events_coincide(self):
        cw, alo = gm.exact_block_diagonal([1.0, 0.5], [1.0, 0.7], 2.0, 1)
        assert cw == pytest.approx(alo, rel=1e-14)

    def test_log_path_below_double_range(self):
        # t = 40 puts the per-coordinate tail around exp(-804); the log
        # output must stay finite and match the asymptote log(n q).
        log_cw, log_alo = gm.exact_block_diagonal_log([1.0], [40.0], 1.0, 1000)
        assert log_cw == log_alo
        assert math.isfinite(log_cw)
        with mpmath.workdps(60):
            log_q = float(mpmath.log(mpmath.ncdf(-mpmath.mpf(40))))
        assert log_cw == pytest.approx(math.log(1000) + log_q, rel=1e-10)

    def test_validation(self):
        with pytest.raises(ValueError):
            gm.exact_block_diagonal([1.0, -1.0], [1.0, 1.0], 1.0, 10)
        with pytest.raises(ValueError):
            gm.exact_block_diagonal([1.0], [0.0], 1.0, 10)
        with pytest.raises(ValueError):
            gm.exact_block_diagonal([1.0], [1.0], 0.0, 10)
        with pytest.raises(ValueError):
            gm.exact_block_diagonal([1.0], [1.0], 1.0, 0)
        with pytest.raises(ValueError):
            gm.exact_block_diagonal([1.0, 1.0], [1.0], 1.0, 10)


class TestCrudeMonteCarlo:
    def test_determinism(self):
        entry = (5, np.ones(2))
        target = gm.Block(np.array([1.0, 1.0]))
        stream = gm.RandomStream(321)
        a = gm.mc_componentwise(STANDARD2, target, entry, 4000, stream)
        b = gm.mc_componentwise(STANDARD2, target, entry, 4000, stream)
        assert a == b

    def test_componentwise_matches_exact_within_four_se(self):
        entry = (5, np.ones(2))
        report = gm.mc_componentwise(
            STANDARD2, gm.Block(np.array([1.0, 1.0])), entry, 20_000, gm.RandomStream(11)
        )
        exact, _ = gm.exact_block_diagonal([1.0, 1.0], [1.0, 1.0], 1.0, 5)
        assert abs(report.p_hat - exact) <= 4.0 * report.std_error
        assert report.method is gm.Method.CRUDE_COMPONENTWISE
        assert report.n == 5
        assert report.scaling_norm_sq == 1.0

    def test_at_least_one_matches_exact_within_four_se(self):
        entry = (5, np.ones(2))
        report = gm.mc_at_least_one(
            STANDARD2, gm.Block(np.array([1.0, 1.0])), entry, 20_000, gm.RandomStream(12)
        )
        _, exact = gm.exact_block_diagonal([1.0, 1.0], [1.0, 1.0], 1.0, 5)
        assert abs(report.p_hat - exact) <= 4.0 * report.std_error
        assert report.method is gm.Method.CRUDE_AT_LEAST_ONE

    def test_event_inclusion_for_upward_closed_sets(self):
        target = gm.Block(np.array([0.8, 1.1]))
        for n, seed in [(3, 21), (8, 22), (20, 23)]:
            entry = (n, np.ones(2))
            cw = gm.mc_componentwise(STANDARD2, target, entry, 10_000, gm.RandomStream(seed))
            alo = gm.mc_at_least_one(STANDARD2, target, entry, 10_000, gm.RandomStream(seed + 100))
            assert alo.p_hat <= cw.p_hat + 4.0 * (alo.std_error + cw.std_error)

    def test_single_draw_estimators_coincide_exactly(self):
        # With n = 1 both events reduce to the same single-vector event and
        # both estimators walk the same substreams, so the counts agree.
        entry = (1, np.ones(2))
        target = gm.Halfspace(np.array([1.0, 1.0]), 1.5)
        stream = gm.RandomStream(77)
        cw = gm.mc_componentwise(STANDARD2, target, entry, 8000, stream)
        alo = gm.mc_at_least_one(STANDARD2, target, entry, 8000, stream)
        assert cw.p_hat == alo.p_hat

    def test_near_certain_event(self):
        entry = (2, np.ones(2))
        report = gm.mc_componentwise(
            STANDARD2, gm.Block(np.array([-10.0, -10.0])), entry, 2000, gm.RandomStream(9)
        )
        assert report.p_hat == 1.0
        assert report.std_error == 0.0
        assert report.log_p_hat == 0.0

    def test_zero_hits_reports_neg_inf_log(self):
        entry = (2, np.ones(2))
        report = gm.mc_componentwise(
            STANDARD2, gm.Block(np.array([9.0, 9.0])), entry, 500, gm.RandomStream(10)
        )
        assert report.p_hat == 0.0
        assert report.log_p_hat == -math.inf

    def test_trials_validation(self):
        entry = (2, np.ones(2))
        with pytest.raises(ValueError):
            gm.mc_componentwise(STANDARD2, gm.Block(np.array([1.0, 1.0])), entry, 0, gm.RandomStream(1))
        with pytest.raises(ValueError):
            gm.mc_at_least_one(STANDARD2, gm.Block(np.array([1.0, 1.0])), entry, -5, gm.RandomStream(1))

    def test_entry_validation(self):
        target = gm.Block(np.array([1.0, 1.0]))
        with pytest.raises(ValueError):
            gm.mc_componentwise(STANDARD2, target, (0, np.ones(2)), 10, gm.RandomStream(1))
        with pytest.raises(ValueError):
            gm.mc_componentwise(STANDARD2, target, (5, -np.ones(2)), 10, gm.RandomStream(1))
        with pytest.raises(ValueError):
            gm.mc_componentwise(
                STANDARD2, target, (5, np.array([[1.0, 0.2], [0.0, 1.0]])), 10, gm.RandomStream(1)
            )

    def test_mixture_model_supported(self):
        cov = gm.build_covariance(np.eye(2))
        mixture = gm.GaussianMixture(
            np.array([0.5, 0.5]),
            (gm.GaussianModel(np.zeros(2), cov), gm.GaussianModel(np.array([0.5, 0.5]), cov)),
        )
        report = gm.mc_componentwise(
            mixture, gm.Block(np.array([1.0, 1.0])), (4, np.ones(2)), 4000, gm.RandomStream(31)
        )
        assert 0.0 < report.p_hat < 1.0


class TestImportanceSampling:
    def test_zero_shift_weights_are_unit(self):
        target = gm.Halfspace(np.array([1.0, 1.0]), 1.0)
        report = gm.is_single(STANDARD2, target, np.zeros(2), 5000, gm.RandomStream(41))
        # Unit weights make the weighted sum an integer hit count.
        count = report.p_hat * 5000
        assert count == pytest.approx(round(count), abs=1e-9)
        assert report.method is gm.Method.IMPORTANCE_SAMPLED_SINGLE

    def test_zero_shift_agrees_with_independent_crude(self):
        target = gm.Halfspace(np.array([1.0, 1.0]), 1.0)
        is_report = gm.is_single(STANDARD2, target, np.zeros(2), 20_000, gm.RandomStream(42))
        crude = gm.mc_componentwise(STANDARD2, target, (1, np.ones(2)), 20_000, gm.RandomStream(43))
        combined = is_report.std_error + crude.std_error
        assert abs(is_report.p_hat - crude.p_hat) <= 4.0 * combined

    def test_shifted_estimate_matches_quadrature_oracle(self):
        # P(X1 + X2 >= 8) = upper tail at 8/sqrt(2); the dominating-point
        # shift (4, 4) makes half the proposals hit.
        target = gm.Halfspace(np.array([1.0, 1.0]), 8.0)
        report = gm.is_single(STANDARD2, target, np.array([4.0, 4.0]), 40_000, gm.RandomStream(44))
        truth = gauss_tail(8.0 / math.sqrt(2.0))
        assert abs(report.p_hat - truth) <= 3.0 * report.std_error
        assert report.std_error <= 0.05 * truth

    def test_degenerate_flag_instead_of_error(self):
        report = gm.is_single(
            STANDARD2, gm.Block(np.array([50.0, 50.0])), np.zeros(2), 200, gm.RandomStream(45)
        )
        assert report.degenerate_weights
        assert report.p_hat == 0.0
        assert report.std_error == 0.0
        assert report.log_p_hat == -math.inf

    def test_determinism(self):
        target = gm.Halfspace(np.array([1.0, 1.0]), 4.0)
        a = gm.is_single(STANDARD2, target, np.array([2.0, 2.0]), 3000, gm.RandomStream(46))
        b = gm.is_single(STANDARD2, target, np.array([2.0, 2.0]), 3000, gm.RandomStream(46))
        assert a == b

    def test_validation(self):
        target = gm.Halfspace(np.array([1.0, 1.0]), 1.0)
        with pytest.raises(ValueError):
            gm.is_single(STANDARD2, target, np.zeros(2), 0, gm.RandomStream(1))
        with pytest.raises(ValueError):
            gm.is_single(STANDARD2, target, np.zeros(3), 10, gm.RandomStream(1))
        mixture = gm.GaussianMixture(np.array([1.0]), (STANDARD2,))
        with pytest.raises(TypeError):
            gm.is_single(mixture, target, np.zeros(2), 10, gm.RandomStream(1))


class TestUnionCombinedReport:
    def test_delta_method_standard_error(self):
        single = gm.EstimateReport(
            p_hat=0.01, std_error=0.001, log_p_hat=math.log(0.01), trials=1000,
            method=gm.Method.IMPORTANCE_SAMPLED_SINGLE, seed=7, n=1, scaling_norm_sq=2.0,
        )
        lifted = gm.union_combined_report(single, 10, 2.0)
        assert lifted.p_hat == pytest.approx(1.0 - 0.99**10, rel=1e-14)
        assert lifted.std_error == pytest.approx(10.0 * 0.99**9 * 0.001, rel=1e-12)
        assert lifted.log_p_hat == pytest.approx(math.log(lifted.p_hat), rel=1e-12)
        assert lifted.method is gm.Method.UNION_COMBINED
        assert lifted.n == 10
        assert lifted.trials == 1000

    def test_degenerate_input_passes_through(self):
        single = gm.EstimateReport(
            p_hat=0.0, std_error=0.0, log_p_hat=-math.inf, trials=100,
            method=gm.Method.IMPORTANCE_SAMPLED_SINGLE, seed=7, n=1,
            scaling_norm_sq=2.0, degenerate_weights=True,
        )
        lifted = gm.union_combined_report(single, 50, 2.0)
        assert lifted.p_hat == 0.0
        assert lifted.log_p_hat == -math.inf
        assert lifted.degenerate_weights


class TestExactBlockReports:
    def test_rows_match_direct_formula(self):
        limit = gm.ScalingLimit.identity(2)
        (entry,) = gm.ScalingLadder(limit, (1000,)).entries()
        cw_row, alo_row = gm.exact_block_reports([1.0, 1.0], [1.2, 1.2], entry, seed=5)
        a_n = math.sqrt(2.0 * math.log(1000.0))
        cw, alo = gm.exact_block_diagonal([1.0, 1.0], [1.2, 1.2], a_n, 1000)
        assert cw_row.p_hat == pytest.approx(cw, rel=1e-12)
        assert alo_row.p_hat == pytest.approx(alo, rel=1e-12)
        assert cw_row.method is gm.Method.EXACT_BLOCK_DIAGONAL
        assert alo_row.method is gm.Method.UNION_COMBINED
        for row in (cw_row, alo_row):
            assert row.std_error == 0.0
            assert row.trials == 0
            assert row.seed == 5
            assert row.n == 1000
            assert row.scaling_norm_sq == pytest.approx(2.0 * math.log(1000.0))

    def test_anisotropic_limit_scales_corner(self):
        limit = gm.ScalingLimit(np.array([1.0, 0.5]))
        (entry,) = gm.ScalingLadder(limit, (100,)).entries()
        cw_row, _ = gm.exact_block_reports([1.0, 1.0], [1.0, 1.0], entry, seed=0)
        a_n = math.sqrt(2.0 * math.log(100.0))
        cw, _ = gm.exact_block_diagonal([1.0, 1.0], [a_n, 0.5 * a_n], 1.0, 100)
        assert cw_row.p_hat == pytest.approx(cw, rel=1e-12)


class TestSlopeFit:
    def test_exact_line(self):
        fit = gm.slope_fit([(2.0, -1.9), (4.0, -3.7), (6.0, -5.5)], predicted_rate=-1.0)
        assert fit.slope == pytest.approx(-0.9, abs=1e-12)
        assert fit.intercept == pytest.approx(-0.1, abs=1e-12)
        assert fit.r_squared == pytest.approx(1.0, abs=1e-12)
        assert fit.relative_gap == pytest.approx(0.1, abs=1e-12)
        assert fit.predicted_rate == -1.0
        assert fit.points == ((2.0, -1.9), (4.0, -3.7), (6.0, -5.5))

    def test_constant_data(self):
        fit = gm.slope_fit([(1.0, -2.0), (2.0, -2.0), (3.0, -2.0)], predicted_rate=-1.0)
        assert fit.slope == pytest.approx(0.0, abs=1e-12)
        assert fit.r_squared == 1.0

    def test_zero_predicted_rate_gap_is_nan(self):
        fit = gm.slope_fit([(1.0, -1.0), (2.0, -2.0), (3.0, -3.0)], predicted_rate=0.0)
        assert math.isnan(fit.relative_gap)

    def test_insufficient_points_message(self):
        with pytest.raises(ValueError, match="insufficient points"):
            gm.slope_fit([(1.0, -1.0), (2.0, -2.0)], predicted_rate=-1.0)
        with pytest.raises(ValueError, match="insufficient points"):
            gm.slope_fit([(1.0, -1.0), (1.0, -1.1), (1.0, -0.9)], predicted_rate=-1.0)

    def test_nonfinite_rejected(self):
        with pytest.raises(ValueError):
            gm.slope_fit([(1.0, -1.0), (2.0, -math.inf), (3.0, -3.0)], predicted_rate=-1.0)


class TestConspiracyRate:
    def test_impossible_in_one_dimension(self):
        p, ratio = gm.conspiracy_rate(
            STANDARD1, gm.Block(np.array([1.5])), (5, np.ones(1)), 5000, gm.RandomStream(61)
        )
        assert p == 0.0
        assert ratio == 0.0

    def test_single_draw_is_conspiracy_free(self):
        p, _ = gm.conspiracy_rate(
            STANDARD2, gm.Block(np.array([1.0, 1.0])), (1, np.ones(2)), 5000, gm.RandomStream(62)
        )
        assert p == 0.0

    def test_matches_exact_difference(self):
        entry = (5, np.ones(2))
        trials = 40_000
        p, ratio = gm.conspiracy_rate(
            STANDARD2, gm.Block(np.array([1.0, 1.0])), entry, trials, gm.RandomStream(63)
        )
        cw, alo = gm.exact_block_diagonal([1.0, 1.0], [1.0, 1.0], 1.0, 5)
        exact_gap = cw - alo
        se = math.sqrt(exact_gap * (1.0 - exact_gap) / trials)
        assert abs(p - exact_gap) <= 3.0 * se

    def test_ratio_uses_provided_exact_union(self):
        entry = (5, np.ones(2))
        cw, alo = gm.exact_block_diagonal([1.0, 1.0], [1.0, 1.0], 1.0, 5)
        p, ratio = gm.conspiracy_rate(
            STANDARD2, gm.Block(np.array([1.0, 1.0])), entry, 40_000,
            gm.RandomStream(63), exact_union=alo,
        )
        assert ratio == pytest.approx(p / alo, rel=1e-12)
        assert ratio == pytest.approx((cw - alo) / alo, rel=0.1)
