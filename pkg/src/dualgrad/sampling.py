"""Repeated noisy measurements: generation, averaging and sample deviation.

Ensembles keep only the sufficient statistics of the samples: the per-node
mean and the per-node sum of squared deviations from it. Both are merged
chunk by chunk, so ``n = 10**5`` samples of a few hundred nodes never need
to be held in memory at once. From these,

    ybar = (1/n) sum_i y_i
    s_n  = sqrt( sum_i |y_i - ybar|^2 / (n - 1) )

in the weighted norm of the data space.
"""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "NoiseModel",
    "MeasurementEnsemble",
    "generate_ensemble",
    "ensemble_from_samples",
    "average",
    "sample_std",
    "EXACT_SIGMA",
]

# noise levels at or below this are treated as exact data
EXACT_SIGMA = 1e-300

_CHUNK_VALUES = 1 << 20


@dataclass(frozen=True)
class NoiseModel:
    """Additive i.i.d. Gaussian noise per node.

    ``sigma`` is absolute, or a fraction of ``max|y|`` when ``relative`` is set.
    """

    sigma: float
    relative: bool = False

    def __post_init__(self):
        if not (self.sigma >= 0 and np.isfinite(self.sigma)):
            raise ValueError(f"noise level must be finite and nonnegative, got {self.sigma}")

    def resolve(self, y_exact):
        """Absolute per-node standard deviation for data ``y_exact``."""
        if self.relative:
            return float(self.sigma * np.max(np.abs(y_exact)))
        return float(self.sigma)


@dataclass
class MeasurementEnsemble:
    """Sufficient statistics of ``n`` samples ``y_1..y_n``."""

    mean: np.ndarray
    m2: np.ndarray
    n: int
    weights: np.ndarray
    sigma: float = None
    samples: np.ndarray = None

    @property
    def average(self):
        return self.mean

    @property
    def sample_std(self):
        return sample_std(self)

    def __post_init__(self):
        if self.n < 1:
            raise ValueError(f"ensemble needs at least one sample, got n={self.n}")


def _merge(mean, m2, count, chunk):
    """Chan's pairwise update of (mean, M2) with a block of new rows."""
    c = chunk.shape[0]
    cmean = chunk.mean(axis=0)
    cm2 = ((chunk - cmean) ** 2).sum(axis=0)
    if count == 0:
        return cmean, cm2, c
    total = count + c
    delta = cmean - mean
    mean = mean + delta * (c / total)
    m2 = m2 + cm2 + delta**2 * (count * c / total)
    return mean, m2, total


def generate_ensemble(y_exact, weights, noise, n, seed=None, keep_samples=False, method="direct"):
    """Draw ``n`` i.i.d. samples ``y_exact + eps_i`` and return their statistics.

    Parameters
    ----------
    y_exact : array
        Exact data on the nodes.
    weights : array
        Quadrature weights of the data space.
    noise : NoiseModel
    n : int
        Number of repeated measurements.
    seed : int, sequence, SeedSequence or Generator
        Source of all randomness; equal seeds give bitwise-equal ensembles.
    keep_samples : bool
        Also store the individual samples (memory ``n * len(y)``).
    method : {"direct", "sufficient"}
        ``"direct"`` draws every sample. ``"sufficient"`` draws the mean and
        the per-node squared deviations from their exact Gaussian and
        chi-square laws, which has the same distribution at O(len(y)) cost.
    """
    n = int(n)
    if n < 1:
        raise ValueError(f"need n >= 1 samples, got {n}")
    y_exact = np.asarray(y_exact, dtype=float)
    weights = np.asarray(weights, dtype=float)
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    sigma = noise.resolve(y_exact)
    size = y_exact.size

    if sigma <= EXACT_SIGMA:
        samples = np.tile(y_exact, (n, 1)) if keep_samples else None
        return MeasurementEnsemble(y_exact.copy(), np.zeros(size), n, weights, sigma, samples)

    if method == "sufficient":
        if keep_samples:
            raise ValueError("keep_samples requires method='direct'")
        mean = y_exact + (sigma / np.sqrt(n)) * rng.standard_normal(size)
        m2 = sigma**2 * rng.chisquare(n - 1, size) if n > 1 else np.zeros(size)
        return MeasurementEnsemble(mean, m2, n, weights, sigma)
    if method != "direct":
        raise ValueError(f"unknown sampling method {method!r}")

    rows = max(1, _CHUNK_VALUES // size)
    mean, m2, count = np.zeros(size), np.zeros(size), 0
    kept = []
    while count < n:
        c = min(rows, n - count)
        eps = sigma * rng.standard_normal((c, size))
        if keep_samples:
            kept.append(y_exact + eps)
        mean, m2, count = _merge(mean, m2, count, eps)
    samples = np.concatenate(kept) if keep_samples else None
    return MeasurementEnsemble(y_exact + mean, m2, n, weights, sigma, samples)


def ensemble_from_samples(samples, weights, sigma=None):
    """Statistics of explicitly given samples (rows of ``samples``)."""
    samples = np.atleast_2d(np.asarray(samples, dtype=float))
    mean = samples.mean(axis=0)
    m2 = ((samples - mean) ** 2).sum(axis=0)
    return MeasurementEnsemble(mean, m2, samples.shape[0], np.asarray(weights, dtype=float),
                               sigma, samples)


def average(ensemble):
    return ensemble.mean


def sample_std(ensemble):
    """Square root of the sample variance in the weighted norm; needs ``n >= 2``."""
    if ensemble.n < 2:
        raise ValueError("sample deviation needs at least two samples")
    return float(np.sqrt(np.dot(ensemble.weights, ensemble.m2) / (ensemble.n - 1)))
