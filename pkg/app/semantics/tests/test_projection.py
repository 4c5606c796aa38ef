"""
Tests for the t-SNE projection
"""
import numpy as np
from django.test import SimpleTestCase

from core.exceptions import DataValidationError
from semantics.projection import (
    TsneConfig,
    joint_probabilities,
    kl_divergence,
    kl_gradient,
    pairwise_distances,
    perplexity_calibration,
    student_t_affinities,
    tsne,
)


def two_clusters(n_per_cluster=10, dims=10, seed=0):
    """Two tight, well separated Gaussian blobs and their labels"""
    rng = np.random.default_rng(seed)
    centers = np.zeros((2, dims))
    centers[1, 0] = 10.0
    labels = np.repeat([0, 1], n_per_cluster)
    points = centers[labels] + rng.normal(scale=0.1,
                                          size=(2 * n_per_cluster, dims))
    return points, labels


class CalibrationTests(SimpleTestCase):
    """Test perplexity calibration"""

    def test_line_endpoints_hit_target(self):
        """Test endpoint rows of a 3-point line reach the target entropy"""
        distances = pairwise_distances(np.array([[0.0], [1.0], [2.0]]))

        calibration = perplexity_calibration(distances, 1.5)

        target = np.log2(1.5)
        self.assertAlmostEqual(calibration.entropies[0], target, delta=1e-5)
        self.assertAlmostEqual(calibration.entropies[2], target, delta=1e-5)
        np.testing.assert_allclose(
            calibration.conditional.sum(axis=1), np.ones(3))
        self.assertEqual(calibration.conditional[0, 0], 0.0)

    def test_equidistant_points_are_uniform(self):
        """Test perplexity N-1 on a simplex gives uniform rows"""
        distances = pairwise_distances(np.eye(4))

        calibration = perplexity_calibration(distances, 3.0)

        expected = (np.ones((4, 4)) - np.eye(4)) / 3.0
        np.testing.assert_allclose(calibration.conditional, expected)

    def test_perplexity_above_n_minus_one(self):
        """Test an unreachable perplexity is rejected"""
        distances = pairwise_distances(np.eye(4))

        with self.assertRaises(DataValidationError):
            perplexity_calibration(distances, 3.5)

    def test_joint_probabilities_sum_to_one(self):
        """Test P is symmetric and sums to one"""
        points, _ = two_clusters()
        calibration = perplexity_calibration(
            pairwise_distances(points), 5.0)

        p = joint_probabilities(calibration.conditional)

        np.testing.assert_allclose(p, p.T)
        self.assertAlmostEqual(p.sum(), 1.0)


class GradientTests(SimpleTestCase):
    """Test the analytic KL gradient"""

    def test_matches_central_differences(self):
        """Test every coordinate against a central finite difference"""
        rng = np.random.default_rng(7)
        points = rng.normal(size=(20, 5))
        p = joint_probabilities(perplexity_calibration(
            pairwise_distances(points), 5.0).conditional)
        coordinates = rng.normal(size=(20, 2))

        analytic = kl_gradient(p, coordinates)

        h = 1e-5
        numeric = np.zeros_like(coordinates)
        for index in np.ndindex(coordinates.shape):
            plus = coordinates.copy()
            minus = coordinates.copy()
            plus[index] += h
            minus[index] -= h
            numeric[index] = (
                kl_divergence(p, student_t_affinities(plus)[0])
                - kl_divergence(p, student_t_affinities(minus)[0])
            ) / (2 * h)

        np.testing.assert_allclose(analytic, numeric, rtol=1e-4, atol=1e-9)


class TsneTests(SimpleTestCase):
    """Test the full projection"""

    def setUp(self):
        self.cfg = TsneConfig(perplexity=5.0, iterations=500,
                              learning_rate=50.0, seed=11)

    def test_separates_clusters(self):
        """Test nearest-centroid labels match the input clusters"""
        points, labels = two_clusters()

        projected = tsne(points, self.cfg)

        coordinates = projected.coordinates
        self.assertEqual(coordinates.shape, (20, 2))
        centroids = np.array([
            coordinates[labels == k].mean(axis=0) for k in (0, 1)])
        distances = np.linalg.norm(
            coordinates[:, np.newaxis, :] - centroids[np.newaxis], axis=2)
        np.testing.assert_array_equal(distances.argmin(axis=1), labels)

    def test_kl_trace(self):
        """Test KL stays non-negative and ends below its start"""
        points, _ = two_clusters(seed=4)

        projected = tsne(points, self.cfg)

        trace = np.array(projected.kl_trace)
        self.assertEqual(len(trace), self.cfg.iterations)
        self.assertTrue(np.all(trace >= -1e-12))
        self.assertLess(trace[-1], trace[0])
        self.assertEqual(projected.kl_divergence, trace[-1])

    def test_deterministic_for_seed(self):
        """Test two runs with one seed give identical coordinates"""
        points, _ = two_clusters(seed=5)

        first = tsne(points, self.cfg)
        second = tsne(points, self.cfg)

        np.testing.assert_array_equal(first.coordinates, second.coordinates)

    def test_too_few_points(self):
        """Test fewer than four points is a validation error"""
        with self.assertRaises(DataValidationError):
            tsne(np.eye(3), TsneConfig(perplexity=0.5))

    def test_perplexity_too_large(self):
        """Test perplexity must be below (N - 1) / 3"""
        points, _ = two_clusters()

        with self.assertRaises(DataValidationError):
            tsne(points, TsneConfig(perplexity=30.0))
