import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from ..modules.basis import WorkingGrid
from ..modules.covariance import (FactorizationError, MaternParams, empirical_covariance_smoothed, matern_correlation,
                                  matern_matrix, repair_pd, safe_cholesky)
from ..modules.model import Curve, FunctionalDataset
from .factories import small_simulation


class MaternTests(SimpleTestCase):

    def test_correlation_is_one_at_zero_distance(self):
        for nu in (0.5, 1.5, 2.5, 3.5, 1.2):
            self.assertAlmostEqual(float(matern_correlation(0.0, 0.3, nu)), 1.0)

    def test_exponential_special_case(self):
        d = np.linspace(0, 2, 11)
        assert_allclose(matern_correlation(d, 0.5, 0.5), np.exp(-d / 0.5))

    def test_bessel_path_agrees_with_closed_form(self):
        d = np.linspace(0.01, 2, 25)
        assert_allclose(matern_correlation(d, 0.5, 2.5 + 1e-9), matern_correlation(d, 0.5, 2.5), rtol=1e-6)
        assert_allclose(matern_correlation(d, 0.5, 3.5 - 1e-9), matern_correlation(d, 0.5, 3.5), rtol=1e-6)

    def test_correlation_decreases_with_distance(self):
        d = np.linspace(0, 3, 50)
        self.assertTrue(np.all(np.diff(matern_correlation(d, 0.5, 3.5)) <= 0))

    def test_matrix_is_symmetric_with_variance_on_diagonal(self):
        grid = np.linspace(0, np.pi / 2, 40)
        cov = matern_matrix(grid, MaternParams(rho=0.5, nu=3.5, sigma2=5.0))
        assert_allclose(cov.values, cov.values.T)
        assert_allclose(np.diag(cov.values), 5.0)
        self.assertEqual(cov.dim, 40)

    def test_invalid_parameters(self):
        with self.assertRaises(ValueError):
            MaternParams(rho=0.0, nu=1.5)
        with self.assertRaises(ValueError):
            MaternParams(rho=1.0, nu=-1.0)
        with self.assertRaises(ValueError):
            matern_correlation(np.array([-1.0]), 1.0, 1.5)


class FactorizationTests(SimpleTestCase):

    def test_positive_definite_needs_no_jitter(self):
        matrix = np.array([[2.0, 0.5], [0.5, 1.0]])
        factor, jitter = safe_cholesky(matrix)
        self.assertEqual(jitter, 0.0)
        assert_allclose(factor @ factor.T, matrix)

    def test_singular_matrix_gets_jitter_and_a_warning(self):
        with self.assertLogs('smoother.modules.covariance', level='WARNING'):
            factor, jitter = safe_cholesky(np.ones((3, 3)), role='ones')
        self.assertGreater(jitter, 0.0)
        self.assertTrue(np.all(np.isfinite(factor)))

    def test_indefinite_matrix_fails_with_role(self):
        with self.assertRaises(FactorizationError) as ctx:
            safe_cholesky(np.diag([1.0, -1.0, 1.0]), role='Sigma_zeta')
        self.assertEqual(ctx.exception.role, 'Sigma_zeta')
        self.assertIsInstance(ctx.exception, np.linalg.LinAlgError)

    def test_repair_clips_negative_eigenvalues(self):
        matrix = np.array([[1.0, 2.0], [2.0, 1.0]])
        repaired = repair_pd(matrix)
        self.assertGreater(np.linalg.eigvalsh(repaired)[0], 0.0)
        assert_allclose(repaired, repaired.T)

    def test_repair_leaves_well_conditioned_matrix_alone(self):
        matrix = np.array([[2.0, 0.3], [0.3, 1.0]])
        assert_allclose(repair_pd(matrix), matrix)


class EmpiricalCovarianceTests(SimpleTestCase):

    def test_smoothed_surface_is_symmetric_positive_definite(self):
        rng = np.random.default_rng(0)
        t = np.linspace(0, 1, 20)
        curves = tuple(
            Curve(curve_id=str(i), grid=t, values=rng.normal() * np.sin(3 * t) + 0.1 * rng.normal(size=t.size))
            for i in range(15)
        )
        data = FunctionalDataset(curves=curves)
        grid = WorkingGrid(points=np.linspace(0.05, 0.95, 10), domain=(0.0, 1.0))
        cov = empirical_covariance_smoothed(data, grid)
        self.assertEqual(cov.values.shape, (10, 10))
        assert_allclose(cov.values, cov.values.T)
        self.assertGreater(np.linalg.eigvalsh(cov.values)[0], 0.0)

    def test_needs_two_curves(self):
        curve = Curve(curve_id='a', grid=np.linspace(0, 1, 5), values=np.zeros(5))
        grid = WorkingGrid(points=np.linspace(0.1, 0.9, 4), domain=(0.0, 1.0))
        with self.assertRaises(ValueError):
            empirical_covariance_smoothed(FunctionalDataset(curves=(curve,)), grid)

    def test_error_shrinks_with_more_curves(self):
        errors = []
        for n in (20, 500):
            sim = small_simulation(n=n, p=20, noise_sd=0.0, seed=13)
            grid = WorkingGrid(points=sim.reference_grid, domain=sim.design.domain)
            cov = empirical_covariance_smoothed(sim.truth, grid, bandwidth=0.02)
            errors.append(np.linalg.norm(cov.values - sim.true_cov) / np.linalg.norm(sim.true_cov))
        self.assertGreater(errors[0], errors[1])
        self.assertLess(errors[1], 0.2)

    def test_curve_order_does_not_matter(self):
        data = small_simulation(n=12, p=15, grid_mode='random').observed
        grid = WorkingGrid(points=np.linspace(0.1, 1.4, 8), domain=data.domain)
        forward = empirical_covariance_smoothed(data, grid)
        backward = empirical_covariance_smoothed(FunctionalDataset(curves=data.curves[::-1], domain=data.domain),
                                                 grid)
        assert_allclose(forward.values, backward.values, rtol=1e-10, atol=1e-12)
