"""
Exact t-SNE for 2-D cluster diagnostics of the embedding set.

O(N^2) per iteration, no tree approximation.
"""
import logging
from dataclasses import asdict, dataclass
from typing import Tuple

import numpy as np
from scipy.spatial.distance import pdist, squareform
from scipy.special import xlogy

from core.exceptions import DataValidationError, NumericalError

logger = logging.getLogger(__name__)

MIN_POINTS = 4
ENTROPY_TOL = 1e-5
MAX_BISECTION_STEPS = 50
MIN_GAIN = 0.01
INIT_SCALE = 1e-4
METRICS = ('euclidean', 'cosine')


@dataclass(frozen=True)
class TsneConfig:
    perplexity: float = 30.0
    dims: int = 2
    iterations: int = 1000
    learning_rate: float = 200.0
    momentum_initial: float = 0.5
    momentum_final: float = 0.8
    momentum_switch: int = 250
    exaggeration: float = 12.0
    exaggeration_iterations: int = 250
    seed: int = 0
    metric: str = 'euclidean'

    def validate(self, n_points):
        if n_points < MIN_POINTS:
            raise DataValidationError(
                f't-SNE needs at least {MIN_POINTS} points, got {n_points}')
        if self.dims != 2:
            raise DataValidationError('Only 2-D output is supported')
        if self.perplexity <= 0:
            raise DataValidationError('Perplexity must be positive')
        if self.perplexity >= (n_points - 1) / 3:
            raise DataValidationError(
                f'Perplexity {self.perplexity} is too large for {n_points} '
                f'points (must be below {(n_points - 1) / 3:.3g})'
            )
        if self.iterations < 1:
            raise DataValidationError('Iterations must be at least 1')
        if self.learning_rate <= 0:
            raise DataValidationError('Learning rate must be positive')
        if self.metric not in METRICS:
            raise DataValidationError(f'Unknown t-SNE metric {self.metric!r}')

    def as_dict(self):
        return asdict(self)


@dataclass(frozen=True)
class Calibration:
    """Per-point Gaussian bandwidths and conditional p_{j|i}"""
    sigmas: np.ndarray
    conditional: np.ndarray
    entropies: np.ndarray


@dataclass(frozen=True)
class ProjectedPoints:
    coordinates: np.ndarray
    kl_divergence: float
    kl_trace: Tuple[float, ...]


def pairwise_distances(vectors, metric='euclidean'):
    """Squared Euclidean distances, or cosine distances, between rows"""
    if metric == 'euclidean':
        return squareform(pdist(vectors, 'sqeuclidean'))
    if metric == 'cosine':
        return squareform(pdist(vectors, 'cosine'))
    raise DataValidationError(f'Unknown t-SNE metric {metric!r}')


def _row_distribution(distances, beta):
    # Shift by the nearest neighbour so large beta cannot underflow
    weights = np.exp(-(distances - distances.min()) * beta)
    probabilities = weights / weights.sum()
    entropy = -float(np.sum(xlogy(probabilities, probabilities))) / np.log(2)
    return probabilities, entropy


def perplexity_calibration(distances, perplexity,
                           tol=ENTROPY_TOL, max_steps=MAX_BISECTION_STEPS):
    """Binary search each point's bandwidth to match the target perplexity"""
    distances = np.asarray(distances, dtype=float)
    n = distances.shape[0]
    if distances.shape != (n, n):
        raise DataValidationError('Distance matrix must be square')
    if perplexity <= 0 or perplexity > n - 1:
        raise DataValidationError(
            f'Perplexity {perplexity} is infeasible for {n} points')

    target = np.log2(perplexity)
    conditional = np.zeros((n, n))
    betas = np.ones(n)
    entropies = np.zeros(n)
    for i in range(n):
        others = np.delete(distances[i], i)
        beta, beta_min, beta_max = 1.0, 0.0, np.inf
        probabilities, entropy = _row_distribution(others, beta)
        for _ in range(max_steps):
            diff = entropy - target
            if abs(diff) <= tol:
                break
            if diff > 0:
                beta_min = beta
                beta = beta * 2.0 if beta_max == np.inf \
                    else (beta + beta_max) / 2.0
            else:
                beta_max = beta
                beta = (beta + beta_min) / 2.0
            probabilities, entropy = _row_distribution(others, beta)

        conditional[i, np.arange(n) != i] = probabilities
        betas[i] = beta
        entropies[i] = entropy

    sigmas = np.sqrt(1.0 / (2.0 * betas))
    return Calibration(sigmas=sigmas, conditional=conditional,
                       entropies=entropies)


def joint_probabilities(conditional):
    """Symmetrize p_{j|i} into P with P_ij = (p_{j|i} + p_{i|j}) / 2N"""
    n = conditional.shape[0]
    return (conditional + conditional.T) / (2.0 * n)


def student_t_affinities(coordinates):
    """Return Q and the unnormalised kernel (1 + |y_i - y_j|^2)^-1"""
    distances = squareform(pdist(coordinates, 'sqeuclidean'))
    kernel = 1.0 / (1.0 + distances)
    np.fill_diagonal(kernel, 0.0)
    return kernel / kernel.sum(), kernel


def kl_divergence(p, q):
    """KL(P || Q) over off-diagonal pairs"""
    return float(np.sum(xlogy(p, p)) - np.sum(xlogy(p, q)))


def kl_gradient(p, coordinates):
    """Analytic gradient of KL(P || Q) with respect to the coordinates"""
    q, kernel = student_t_affinities(coordinates)
    weights = (p - q) * kernel
    laplacian = np.diag(weights.sum(axis=1)) - weights
    return 4.0 * laplacian @ coordinates


def tsne(embeddings, cfg):
    """Project embeddings to 2-D by gradient descent on KL(P || Q)"""
    vectors = getattr(embeddings, 'vectors', embeddings)
    vectors = np.asarray(vectors, dtype=float)
    n = vectors.shape[0]
    cfg.validate(n)

    distances = pairwise_distances(vectors, cfg.metric)
    calibration = perplexity_calibration(distances, cfg.perplexity)
    p = joint_probabilities(calibration.conditional)

    rng = np.random.default_rng(cfg.seed)
    coordinates = rng.normal(scale=INIT_SCALE, size=(n, cfg.dims))
    update = np.zeros_like(coordinates)
    gains = np.ones_like(coordinates)

    kl_trace = []
    for iteration in range(cfg.iterations):
        exaggerated = iteration < cfg.exaggeration_iterations
        target = p * cfg.exaggeration if exaggerated else p
        momentum = cfg.momentum_initial \
            if iteration < cfg.momentum_switch else cfg.momentum_final

        q, kernel = student_t_affinities(coordinates)
        weights = (target - q) * kernel
        gradient = 4.0 * (np.diag(weights.sum(axis=1)) - weights) \
            @ coordinates

        same_sign = (gradient > 0) == (update > 0)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, MIN_GAIN, out=gains)
        update = momentum * update - cfg.learning_rate * gains * gradient
        coordinates = coordinates + update
        coordinates = coordinates - coordinates.mean(axis=0)

        if not np.all(np.isfinite(coordinates)):
            raise NumericalError(
                f't-SNE diverged at iteration {iteration}: non-finite '
                f'coordinate'
            )
        q, _ = student_t_affinities(coordinates)
        kl_trace.append(kl_divergence(p, q))
        if (iteration + 1) % 100 == 0:
            logger.debug('t-SNE iteration %d KL %.6f', iteration + 1,
                         kl_trace[-1])

    logger.info('t-SNE finished after %d iterations, KL %.6f',
                cfg.iterations, kl_trace[-1])
    return ProjectedPoints(
        coordinates=coordinates,
        kl_divergence=kl_trace[-1],
        kl_trace=tuple(kl_trace),
    )
