"""Small statistical helpers shared by the Monte Carlo drivers."""

from __future__ import annotations

import numpy as np

# Number of consecutive batches used for batch-mean standard errors.
N_BATCHES = 16


def batch_se(samples: np.ndarray, n_batches: int = N_BATCHES) -> float:
    """Batch-mean standard error of ``mean(samples)``.

    Splits the (possibly autocorrelated) sequence into ``n_batches``
    consecutive batches and returns the standard error of the batch means.
    Samples that do not fill a whole batch are dropped from the end.
    """
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size < 2 * n_batches:
        # Too short for batching: fall back to the plain iid estimate.
        return float(np.std(samples, ddof=1) / np.sqrt(samples.size))
    per = samples.size // n_batches
    means = samples[: per * n_batches].reshape(n_batches, per).mean(axis=1)
    return float(np.std(means, ddof=1) / np.sqrt(n_batches))


def raw_correlation(a: np.ndarray, b: np.ndarray) -> float:
    """Uncentered correlation  E[a.b] / sqrt(E|a|^2 E|b|^2).

    ``a`` and ``b`` are (n, d) sample arrays; the dot product runs over the
    vector axis.  Returns 0 when either second moment vanishes.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    num = float(np.mean(np.sum(a * b, axis=-1)))
    den = float(np.sqrt(np.mean(np.sum(a * a, axis=-1)) * np.mean(np.sum(b * b, axis=-1))))
    if den == 0.0:
        return 0.0
    return num / den
