import numpy as np
from django.test import SimpleTestCase
from numpy.testing import assert_allclose

from ..modules.basis import (WorkingGrid, averaged_knots, build_basis, coefficients_from_values, evaluate_basis,
                             select_working_grid)


class WorkingGridTests(SimpleTestCase):

    def test_percentiles_of_pooled_grid(self):
        pooled = np.linspace(0, 1, 101)
        grid = select_working_grid(pooled, 4, domain=(0.0, 1.0))
        assert_allclose(grid.points, [0.2, 0.4, 0.6, 0.8])
        self.assertEqual(grid.L, 4)
        self.assertEqual(grid.domain, (0.0, 1.0))

    def test_domain_defaults_to_pooled_range(self):
        grid = select_working_grid(np.linspace(0.5, 2.5, 30), 5)
        self.assertEqual(grid.domain, (0.5, 2.5))

    def test_too_many_ties(self):
        pooled = np.repeat([0.0, 1.0], 50)
        with self.assertRaises(ValueError):
            select_working_grid(pooled, 6)

    def test_cubic_splines_need_four_points(self):
        with self.assertRaises(ValueError):
            select_working_grid(np.linspace(0, 1, 20), 3)

    def test_grid_must_be_increasing_and_inside_domain(self):
        with self.assertRaises(ValueError):
            WorkingGrid(points=np.array([0.1, 0.1, 0.5]), domain=(0.0, 1.0))
        with self.assertRaises(ValueError):
            WorkingGrid(points=np.array([0.1, 0.5, 1.5]), domain=(0.0, 1.0))


class BasisTests(SimpleTestCase):

    def setUp(self):
        self.grid = WorkingGrid(points=np.linspace(0.05, 0.95, 10), domain=(0.0, 1.0))
        self.basis = build_basis(self.grid)

    def test_knot_vector_layout(self):
        knots = averaged_knots(self.grid, 10)
        self.assertEqual(knots.size, 10 + 4)
        assert_allclose(knots[:4], 0.0)
        assert_allclose(knots[-4:], 1.0)
        self.assertTrue(np.all(np.diff(knots) >= 0))
        assert_allclose(knots[4], self.grid.points[1:4].mean())

    def test_partition_of_unity(self):
        t = np.linspace(0, 1, 57)
        assert_allclose(evaluate_basis(self.basis, t).sum(axis=1), 1.0, atol=1e-12)

    def test_local_support(self):
        values = evaluate_basis(self.basis, np.linspace(0, 1, 101))
        self.assertTrue(np.all(np.count_nonzero(values > 1e-14, axis=1) <= 4))
        self.assertTrue(np.all(values >= -1e-14))

    def test_pinv_inverts_square_basis_matrix(self):
        self.assertEqual(self.basis.K, 10)
        assert_allclose(self.basis.pinv @ self.basis.matrix, np.eye(10), atol=1e-8)

    def test_values_on_grid_round_trip(self):
        z = np.sin(3 * self.grid.points)
        coef = coefficients_from_values(self.basis, z)
        assert_allclose(self.basis.matrix @ coef, z, atol=1e-8)

    def test_smooth_function_is_reproduced_between_grid_points(self):
        coef = coefficients_from_values(self.basis, np.cos(2 * self.grid.points))
        t = np.linspace(0.1, 0.9, 9)
        assert_allclose(evaluate_basis(self.basis, t) @ coef, np.cos(2 * t), atol=5e-3)

    def test_evaluation_outside_domain(self):
        with self.assertRaises(ValueError):
            evaluate_basis(self.basis, [1.2])

    def test_only_square_systems(self):
        with self.assertRaises(ValueError):
            build_basis(self.grid, K=8)

    def test_wrong_number_of_values(self):
        with self.assertRaises(ValueError):
            coefficients_from_values(self.basis, np.zeros(7))

    def test_to_dict(self):
        doc = self.basis.to_dict()
        self.assertEqual(doc['order'], 4)
        self.assertEqual(len(doc['working_grid']), 10)
        self.assertEqual(doc['domain'], [0.0, 1.0])
