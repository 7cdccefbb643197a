"""Online Bayesian model averaging over a fixed set of models.

Weights are stored as unnormalized log-weights. Each update adds the models'
log predictive densities of newly observed data; normalization happens only
when weights are read.
"""

from __future__ import annotations

import numpy as np
from scipy.special import logsumexp

from .exceptions import DegenerateWeightsError, ShapeError

WEIGHT_FLOOR = 1e-12


def normalize(log_weights) -> np.ndarray:
    """Softmax of the log-weights (max-shifted)."""
    lw = np.asarray(log_weights, dtype=float)
    if lw.ndim != 1 or lw.size == 0:
        raise ShapeError("log-weights must be a non-empty vector")
    if not np.any(np.isfinite(lw)) or np.any(lw == np.inf) or np.any(np.isnan(lw)):
        raise DegenerateWeightsError(f"cannot normalize log-weights {lw}")
    w = np.exp(lw - logsumexp(lw))
    return w / w.sum()


def floor_log_weights(log_weights, floor: float | None = WEIGHT_FLOOR) -> np.ndarray:
    """Keep every model's weight at least ``floor`` times the largest one.

    Applied in the log domain without renormalizing, so a model that did
    badly during early transients can still recover later.
    """
    lw = np.asarray(log_weights, dtype=float)
    if floor is None:
        return lw.copy()
    return np.maximum(lw, lw.max() + np.log(floor))


def bma_local_update(log_weights, loglik, floor: float | None = WEIGHT_FLOOR) -> np.ndarray:
    """Add each model's log predictive density of the agent's own data."""
    lw = np.asarray(log_weights, dtype=float)
    ll = np.asarray(loglik, dtype=float)
    if ll.shape != lw.shape:
        raise ShapeError(f"{lw.shape[0]} models but loglik of shape {ll.shape}")
    return floor_log_weights(lw + ll, floor)


def bma_consensus_update(
    log_weights, summed_loglik, floor: float | None = WEIGHT_FLOOR
) -> np.ndarray:
    """Add the network-wide log-likelihood, as estimated by ``N`` times a consensus average.

    Arithmetically the same as :func:`bma_local_update`; kept separate because
    the input means something different.
    """
    return bma_local_update(log_weights, summed_loglik, floor)


def mixture_predict(means, variances, weights, y=None):
    """Gaussian-mixture predictive.

    Returns the mixture mean, and additionally the mixture density at ``y``
    when ``y`` is given.
    """
    means = np.asarray(means, dtype=float)
    variances = np.asarray(variances, dtype=float)
    weights = np.asarray(weights, dtype=float)
    if means.shape[-1] != weights.shape[0] or variances.shape != means.shape:
        raise ShapeError(
            f"{weights.shape[0]} weights for predictions of shape {means.shape}"
        )
    mean = means @ weights
    if y is None:
        return mean
    y = np.asarray(y, dtype=float)[..., None]
    dens = np.exp(-0.5 * (y - means) ** 2 / variances) / np.sqrt(2 * np.pi * variances)
    return mean, dens @ weights


def mixture_variance(means, variances, weights) -> np.ndarray:
    """Variance of the Gaussian mixture (law of total variance)."""
    means = np.asarray(means, dtype=float)
    weights = np.asarray(weights, dtype=float)
    mean = means @ weights
    second = (np.asarray(variances, dtype=float) + means**2) @ weights
    return second - mean**2
