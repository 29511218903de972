import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose
from scipy import stats

from ..modules.diagnostics import (FunctionalEstimate, chi2_survival, coverage, gof_from_discrepancies, gof_pdm,
                                   psrf, psrf_report, rmse_suite)
from ..modules.model import Curve, FunctionalDataset


class PsrfTests(SimpleTestCase):

    def setUp(self):
        self.rng = np.random.default_rng(0)

    def test_mixed_chains_are_close_to_one(self):
        value = psrf(self.rng.standard_normal((4, 2000)))
        self.assertLess(value.value, 1.01)
        self.assertFalse(value.degenerate)

    def test_separated_chains_fail(self):
        chains = self.rng.standard_normal((2, 500)) + np.array([[0.0], [5.0]])
        self.assertGreater(float(psrf(chains)), 2.0)

    def test_drifting_chain_is_caught_by_splitting(self):
        drift = np.linspace(0, 10, 400)
        chains = np.vstack([drift, drift]) + 0.1 * self.rng.standard_normal((2, 400))
        self.assertGreater(psrf(chains).value, 1.1)

    def test_constant_chains_are_degenerate(self):
        value = psrf(np.ones((2, 20)))
        self.assertTrue(value.degenerate)
        self.assertEqual(value.value, 1.0)
        value = psrf(np.vstack([np.zeros(20), np.ones(20)]))
        self.assertEqual(value.value, np.inf)

    def test_invariant_to_affine_rescaling(self):
        chains = self.rng.standard_normal((3, 300)) + np.array([[0.0], [0.3], [0.6]])
        assert_allclose(psrf(chains).value, psrf(5.0 * chains - 2.0).value, rtol=1e-10)

    def test_needs_two_chains_of_ten_draws(self):
        with self.assertRaises(ValueError):
            psrf(self.rng.standard_normal((1, 100)))
        with self.assertRaises(ValueError):
            psrf(self.rng.standard_normal((2, 9)))

    def test_report_lists_failures(self):
        traces = {
            'good': self.rng.standard_normal((2, 200)),
            'bad': self.rng.standard_normal((2, 200)) + np.array([[0.0], [4.0]]),
        }
        with self.assertLogs('smoother.modules.diagnostics', level='WARNING'):
            report = psrf_report(traces)
        self.assertEqual(report.failing, ['bad'])
        self.assertFalse(report.passed)
        doc = report.to_dict()
        self.assertEqual(doc['failing'], ['bad'])

    def test_infinite_values_serialize_as_none(self):
        report = psrf_report({'flat': np.vstack([np.zeros(20), np.ones(20)])})
        self.assertIsNone(report.to_dict()['values']['flat'])
        self.assertEqual(report.to_dict()['degenerate'], ['flat'])


class GoodnessOfFitTests(SimpleTestCase):

    def test_chi2_survival_matches_scipy(self):
        x = np.array([0.5, 3.0, 12.0, 40.0])
        assert_allclose(chi2_survival(x, 10), stats.chi2.sf(x, 10), rtol=1e-10)

    def test_well_specified_discrepancies_give_uniform_p_values(self):
        rng = np.random.default_rng(1)
        sizes = np.array([20, 25, 30])
        discrepancies = np.column_stack([rng.chisquare(k, 4000) for k in sizes])
        report = gof_from_discrepancies(discrepancies, sizes, ['a', 'b', 'c'])
        self.assertLess(abs(report.median_p - 0.5), 0.05)
        self.assertFalse(report.lack_of_fit)
        self.assertEqual(sorted(report.per_curve), ['a', 'b', 'c'])

    def test_inflated_discrepancies_signal_lack_of_fit(self):
        sizes = np.array([20, 20])
        report = gof_from_discrepancies(np.full((50, 2), 60.0), sizes, ['a', 'b'])
        self.assertTrue(report.lack_of_fit)
        self.assertEqual(report.curves_below_level, 2)
        self.assertTrue(report.to_dict()['lack_of_fit'])

    def test_shape_checks(self):
        with self.assertRaises(ValueError):
            gof_from_discrepancies(np.ones((3, 2)), [5, 5, 5], ['a', 'b', 'c'])
        with self.assertRaises(ValueError):
            gof_from_discrepancies(np.ones((0, 2)), [5, 5], ['a', 'b'])

    def test_pivotal_discrepancy_from_signal_draws(self):
        grid = np.linspace(0, 1, 5)
        data = FunctionalDataset(curves=(
            Curve(curve_id='a', grid=grid, values=np.ones(5)),
            Curve(curve_id='b', grid=grid[:3], values=np.zeros(3)),
        ))
        draws = np.zeros((2, 8))
        report = gof_pdm(data, draws, [1.0, 0.5])
        # draw 0: curve a contributes 5 / 1, draw 1: 5 / 0.5
        assert_allclose(report.draw_p_values, chi2_survival(np.array([5.0, 10.0]), 8))
        with self.assertRaises(ValueError):
            gof_pdm(data, np.zeros((2, 7)), [1.0, 1.0])


class ScoringTests(SimpleTestCase):

    def setUp(self):
        self.grid = np.linspace(0, 1, 4)
        self.truth = FunctionalEstimate(
            signals=[np.zeros(4), np.zeros(3)],
            grid=self.grid,
            mean=np.zeros(4),
            covariance=np.eye(4),
            sigma_eps2=1.0,
        )

    def test_rmse_scores(self):
        estimate = FunctionalEstimate(
            signals=[np.ones(4), np.ones(3)],
            grid=self.grid,
            mean=np.full(4, 2.0),
            covariance=np.eye(4),
            sigma_eps2=1.5,
        )
        scores = rmse_suite(estimate, self.truth)
        self.assertAlmostEqual(scores['signal'], 1.0)
        self.assertAlmostEqual(scores['mean'], 2.0)
        self.assertAlmostEqual(scores['covariance'], 0.0)
        self.assertAlmostEqual(scores['sigma_eps2'], 0.5)

    def test_missing_noise_estimate_scores_none(self):
        estimate = FunctionalEstimate(signals=self.truth.signals, grid=self.grid, mean=self.truth.mean,
                                      covariance=self.truth.covariance)
        self.assertIsNone(rmse_suite(estimate, self.truth)['sigma_eps2'])

    def test_grid_mismatch(self):
        estimate = FunctionalEstimate(signals=self.truth.signals, grid=np.linspace(0, 2, 4), mean=self.truth.mean,
                                      covariance=self.truth.covariance)
        with self.assertRaises(ValueError):
            rmse_suite(estimate, self.truth)

    def test_coverage(self):
        self.assertEqual(coverage([0, 0, 0, 0], [1, 1, 1, 1], [0.5, 1.0, 1.5, -0.1]), 0.5)
        with self.assertRaises(ValueError):
            coverage([0, 0], [1, 1], [0.5])
