import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose, assert_array_equal

from ..modules.covariance import MaternParams
from ..modules.simulation import (MeanSpec, SimDesign, hermite_transform, make_grids, nonstationary_transform,
                                  simulate_dataset, true_moments, warp)
from .factories import small_design


class DesignTests(SimpleTestCase):

    def test_defaults(self):
        design = SimDesign()
        self.assertEqual((design.n, design.p, design.grid_mode), (30, 40, 'common'))
        self.assertAlmostEqual(design.snr, 2.0)
        self.assertEqual(design.to_dict()['covariance'], {'rho': 0.5, 'nu': 3.5, 'sigma2': 5.0})

    def test_validation(self):
        with self.assertRaises(ValueError):
            SimDesign(n=0)
        with self.assertRaises(ValueError):
            SimDesign(grid_mode='sparse')
        with self.assertRaises(ValueError):
            SimDesign(transform='log')
        with self.assertRaises(ValueError):
            SimDesign(domain=(1.0, 1.0))
        with self.assertRaises(ValueError):
            SimDesign(transform='nonstationary', domain=(-1.0, 1.0))

    def test_mean_function(self):
        assert_allclose(MeanSpec()(np.array([0.0, np.pi / 8])), [0.0, 3.0])


class TransformTests(SimpleTestCase):

    def test_warp_and_amplitude(self):
        assert_allclose(warp([0.0, 1.0, 8.0]), [0.0, 1.0, 4.0])
        assert_allclose(nonstationary_transform([2.0, 2.0], [0.0, 1.0]), [1.0, 3.0])

    def test_hermite_transform(self):
        assert_allclose(hermite_transform([-1.0, 0.0, 1.0]), [-1.0, -0.2, 1.0])

    def test_grids(self):
        rng = np.random.default_rng(0)
        common = make_grids('common', 3, 5, (0.0, 1.0), rng)
        assert_allclose(common[2], np.linspace(0, 1, 5))
        random = make_grids('random', 3, 5, (0.0, 1.0), rng)
        for grid in random:
            self.assertTrue(np.all(np.diff(grid) > 0))
            self.assertTrue(np.all((grid >= 0) & (grid <= 1)))
        with self.assertRaises(ValueError):
            make_grids('common', 3, 1, (0.0, 1.0), rng)


class SimulateTests(SimpleTestCase):

    def test_same_seed_same_data(self):
        first = simulate_dataset(small_design(grid_mode='random'))
        second = simulate_dataset(small_design(grid_mode='random'))
        for a, b in zip(first.observed.curves, second.observed.curves):
            assert_array_equal(a.grid, b.grid)
            assert_array_equal(a.values, b.values)
        third = simulate_dataset(small_design(grid_mode='random', seed=8))
        self.assertFalse(np.array_equal(first.observed.curves[0].values, third.observed.curves[0].values))

    def test_shapes_and_ids(self):
        sim = simulate_dataset(small_design(n=12, p=6))
        self.assertEqual(sim.observed.n, 12)
        self.assertEqual(sim.observed.curves[0].curve_id, 'curve_01')
        self.assertEqual(sim.observed.curves[-1].curve_id, 'curve_12')
        self.assertEqual(sim.true_cov.shape, (6, 6))
        self.assertAlmostEqual(sim.noise_variance, 1.25)
        assert_allclose(sim.reference_grid, sim.observed.curves[0].grid)

    def test_random_grids_use_equally_spaced_reference(self):
        sim = simulate_dataset(small_design(grid_mode='random', reference_size=25))
        assert_allclose(sim.reference_grid, np.linspace(0, np.pi / 2, 25))
        self.assertFalse(sim.observed.is_common_grid)

    def test_noise_is_the_only_difference_from_truth(self):
        sim = simulate_dataset(small_design(n=60, p=40))
        noise = np.concatenate([o.values - t.values for o, t in zip(sim.observed.curves, sim.truth.curves)])
        self.assertLess(abs(noise.var() - 1.25) / 1.25, 0.15)

    def test_noiseless_design(self):
        sim = simulate_dataset(small_design(noise_sd=0.0))
        for o, t in zip(sim.observed.curves, sim.truth.curves):
            assert_array_equal(o.values, t.values)

    def test_sample_moments_match_true_moments(self):
        for transform in ('none', 'nonstationary', 'hermite'):
            with self.subTest(transform=transform):
                sim = simulate_dataset(small_design(n=3000, p=5, transform=transform, seed=3))
                values = np.vstack([c.values for c in sim.truth.curves])
                mean, cov = true_moments(sim.design, sim.reference_grid)
                se = np.sqrt(np.diag(cov) / values.shape[0])
                self.assertTrue(np.all(np.abs(values.mean(axis=0) - mean) < 4 * se))
                assert_allclose(np.var(values, axis=0), np.diag(cov), rtol=0.15)

    def test_zero_signal_variance_leaves_the_mean(self):
        sim = simulate_dataset(SimDesign(n=3, p=5, covariance=MaternParams(rho=0.5, nu=3.5, sigma2=0.0)))
        for curve in sim.truth.curves:
            assert_allclose(curve.values, MeanSpec()(curve.grid))
