"""
Tests for the regression statistics
"""
import math

from django.test import SimpleTestCase
from scipy import special
from scipy import stats as scipy_stats

from core.exceptions import DataValidationError
from foraging.stats import (
    P_VALUE_FLOOR,
    ols_regression,
    regularized_incomplete_beta,
    student_t_two_sided_p,
)


class IncompleteBetaTests(SimpleTestCase):
    """Test the regularized incomplete beta function"""

    def test_matches_scipy(self):
        """Test a spread of parameters against scipy.special.betainc"""
        cases = [
            (0.5, 0.5, 0.3), (1.0, 0.5, 0.9), (5.0, 0.5, 0.2),
            (2.0, 3.0, 0.4), (10.0, 0.5, 0.95), (50.0, 0.5, 0.5),
        ]
        for a, b, x in cases:
            with self.subTest(a=a, b=b, x=x):
                expected = special.betainc(a, b, x)
                self.assertAlmostEqual(
                    regularized_incomplete_beta(a, b, x) / expected, 1.0,
                    delta=1e-9)

    def test_endpoints(self):
        """Test I_0 = 0 and I_1 = 1"""
        self.assertEqual(regularized_incomplete_beta(2.0, 3.0, 0.0), 0.0)
        self.assertEqual(regularized_incomplete_beta(2.0, 3.0, 1.0), 1.0)

    def test_invalid_arguments(self):
        """Test non-positive parameters and x outside [0, 1] fail"""
        with self.assertRaises(DataValidationError):
            regularized_incomplete_beta(0.0, 1.0, 0.5)
        with self.assertRaises(DataValidationError):
            regularized_incomplete_beta(1.0, 1.0, 1.5)


class StudentTTests(SimpleTestCase):
    """Test two-sided Student-t p-values"""

    def test_t_2_5_df_10(self):
        """Test t = 2.5 with 10 degrees of freedom"""
        expected = 2 * scipy_stats.t.sf(2.5, 10)

        p = student_t_two_sided_p(2.5, 10)

        self.assertAlmostEqual(p / expected, 1.0, delta=1e-6)

    def test_symmetric_in_t(self):
        """Test the sign of t does not change p"""
        self.assertEqual(student_t_two_sided_p(-1.7, 8),
                         student_t_two_sided_p(1.7, 8))

    def test_zero_t(self):
        """Test t = 0 gives p = 1"""
        self.assertAlmostEqual(student_t_two_sided_p(0.0, 5), 1.0)

    def test_infinite_t_floors(self):
        """Test an infinite statistic reports the p-value floor"""
        self.assertEqual(student_t_two_sided_p(math.inf, 5), P_VALUE_FLOOR)

    def test_huge_t_never_zero(self):
        """Test extreme statistics stay at or above the floor"""
        self.assertGreaterEqual(student_t_two_sided_p(1e200, 3),
                                P_VALUE_FLOOR)


class OlsRegressionTests(SimpleTestCase):
    """Test ordinary least squares with slope inference"""

    def test_worked_example(self):
        """Test x = 1..4, y = 2, 1, 4, 3"""
        result = ols_regression([(1, 2), (2, 1), (3, 4), (4, 3)])

        self.assertAlmostEqual(result.slope, 0.6, delta=1e-9)
        self.assertAlmostEqual(result.intercept, 1.0, delta=1e-9)
        self.assertAlmostEqual(result.r_squared, 0.36, delta=1e-12)
        self.assertEqual(result.n, 4)
        expected = 2 * scipy_stats.t.sf(result.t_statistic, 2)
        self.assertAlmostEqual(result.p_value / expected, 1.0, delta=1e-6)
        self.assertAlmostEqual(result.p_value, 0.4, delta=1e-9)

    def test_matches_scipy_linregress(self):
        """Test a noisy dataset against scipy.stats.linregress"""
        xs = [12, 15, 20, 22, 25, 31, 33, 40, 41, 47]
        ys = [9.1, 8.7, 7.9, 8.2, 6.5, 6.8, 5.1, 4.9, 5.5, 3.2]

        result = ols_regression(list(zip(xs, ys)))

        oracle = scipy_stats.linregress(xs, ys)
        self.assertAlmostEqual(result.slope, oracle.slope, places=12)
        self.assertAlmostEqual(result.intercept, oracle.intercept,
                               places=10)
        self.assertAlmostEqual(result.stderr, oracle.stderr, places=12)
        self.assertAlmostEqual(result.p_value / oracle.pvalue, 1.0,
                               delta=1e-6)
        self.assertLess(result.slope, 0)

    def test_perfect_fit(self):
        """Test zero residuals give infinite t and the p floor"""
        result = ols_regression([(1, 3), (2, 5), (3, 7)])

        self.assertEqual(result.slope, 2.0)
        self.assertEqual(result.stderr, 0.0)
        self.assertTrue(math.isinf(result.t_statistic))
        self.assertEqual(result.p_value, P_VALUE_FLOOR)
        self.assertEqual(result.r_squared, 1.0)

    def test_flat_perfect_fit(self):
        """Test a constant y gives slope 0 with p = 1"""
        result = ols_regression([(1, 2), (2, 2), (3, 2)])

        self.assertEqual(result.slope, 0.0)
        self.assertEqual(result.p_value, 1.0)

    def test_too_few_points(self):
        """Test fewer than three points is rejected"""
        with self.assertRaises(DataValidationError):
            ols_regression([(1, 2), (2, 3)])

    def test_constant_x(self):
        """Test zero variance in x is rejected"""
        with self.assertRaises(DataValidationError):
            ols_regression([(2, 1), (2, 3), (2, 5)])
