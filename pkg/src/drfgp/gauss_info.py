"""Information-form Bayesian linear regression over random-feature weights.

The posterior over the 2J feature weights is kept as a precision matrix and
an information vector. New data enter additively, which is what lets
statistics from many agents be summed (or averaged by consensus) before they
are folded into a posterior.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as la

from .exceptions import NumericalDegeneracyError, ShapeError
from .rff import RffBasis, feature_map, features

__all__ = [
    "InfoState",
    "LocalStats",
    "Predictive",
    "local_stats",
    "apply_fused_stats",
    "posterior_moments",
    "predict",
    "predict_batch",
    "log_predictive_density",
]

_LOG_2PI = np.log(2.0 * np.pi)


def _cholesky(precision: np.ndarray) -> np.ndarray:
    try:
        return la.cholesky(precision, lower=True, check_finite=True)
    except (la.LinAlgError, ValueError) as exc:
        raise NumericalDegeneracyError(
            f"precision matrix is not positive definite: {exc}"
        ) from exc


@dataclass(frozen=True, eq=False)
class InfoState:
    """Gaussian posterior in information form.

    Attributes
    ----------
    precision : ndarray of shape (2J, 2J)
        Posterior precision matrix.
    info_vec : ndarray of shape (2J,)
        Precision times posterior mean.
    prior_var, obs_var : float
        Prior weight variance and observation-noise variance.
    """

    precision: np.ndarray
    info_vec: np.ndarray
    prior_var: float
    obs_var: float
    _chol: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        P = np.array(self.precision, dtype=float)
        eta = np.array(self.info_vec, dtype=float)
        if P.ndim != 2 or P.shape[0] != P.shape[1] or eta.shape != (P.shape[0],):
            raise ShapeError(f"incompatible precision {P.shape} / info_vec {eta.shape}")
        if not (self.prior_var > 0 and self.obs_var > 0):
            raise ValueError("prior_var and obs_var must be positive")
        P.setflags(write=False)
        eta.setflags(write=False)
        object.__setattr__(self, "precision", P)
        object.__setattr__(self, "info_vec", eta)

    @classmethod
    def prior(cls, dim: int, prior_var: float = 1.0, obs_var: float = 1e-2) -> "InfoState":
        """Fresh state: precision ``I / prior_var`` and zero information vector."""
        return cls(np.eye(dim) / prior_var, np.zeros(dim), float(prior_var), float(obs_var))

    @property
    def dim(self) -> int:
        return self.info_vec.shape[0]

    @property
    def cholesky(self) -> np.ndarray:
        """Lower Cholesky factor of the precision, computed once and cached."""
        if self._chol is None:
            object.__setattr__(self, "_chol", _cholesky(self.precision))
        return self._chol


@dataclass(frozen=True, eq=False)
class LocalStats:
    """Data-only contribution of a batch: ``P = Phi Phi^T / obs_var``, ``s = Phi y / obs_var``."""

    P: np.ndarray
    s: np.ndarray

    @classmethod
    def zeros(cls, dim: int) -> "LocalStats":
        return cls(np.zeros((dim, dim)), np.zeros(dim))

    def __add__(self, other: "LocalStats") -> "LocalStats":
        return LocalStats(self.P + other.P, self.s + other.s)


@dataclass(frozen=True)
class Predictive:
    mean: float
    variance: float


def local_stats(basis: RffBasis, X, y, obs_var: float) -> LocalStats:
    """Sufficient statistics of a batch of observations.

    The prior does not appear here; it is carried by the initial
    :class:`InfoState`.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim == 1:
        X = X[None, :] if X.size else X.reshape(0, basis.dim)
    y = np.atleast_1d(y)
    if X.shape[0] != y.shape[0] or y.ndim != 1:
        raise ShapeError(f"{X.shape[0]} inputs but {y.shape} targets")
    if not obs_var > 0:
        raise ValueError("obs_var must be positive")
    Phi = features(basis, X)  # (n, 2J)
    return LocalStats(Phi.T @ Phi / obs_var, Phi.T @ y / obs_var)


def apply_fused_stats(state: InfoState, P_sum, s_sum) -> InfoState:
    """Add (possibly consensus-estimated) statistics to a posterior.

    Raises
    ------
    NumericalDegeneracyError
        If the updated precision is not positive definite.
    """
    P_sum = np.asarray(P_sum, dtype=float)
    s_sum = np.asarray(s_sum, dtype=float)
    if P_sum.shape != state.precision.shape or s_sum.shape != state.info_vec.shape:
        raise ShapeError(
            f"statistics of shape {P_sum.shape}/{s_sum.shape} do not match state "
            f"of dimension {state.dim}"
        )
    D = state.precision + P_sum
    D = 0.5 * (D + D.T)
    return InfoState(
        D, state.info_vec + s_sum, state.prior_var, state.obs_var, _chol=_cholesky(D)
    )


def posterior_moments(state: InfoState) -> tuple[np.ndarray, np.ndarray]:
    """Posterior mean and covariance, via Cholesky solves."""
    c = (state.cholesky, True)
    mean = la.cho_solve(c, state.info_vec)
    cov = la.cho_solve(c, np.eye(state.dim))
    return mean, 0.5 * (cov + cov.T)


def predict_batch(state: InfoState, basis: RffBasis, X) -> tuple[np.ndarray, np.ndarray]:
    """Predictive means and variances (noise included) at each row of ``X``."""
    Phi = features(basis, X)
    if Phi.shape[1] != state.dim:
        raise ShapeError(f"basis has {Phi.shape[1]} features but state has {state.dim}")
    L = state.cholesky
    mean = Phi @ la.cho_solve((L, True), state.info_vec)
    V = la.solve_triangular(L, Phi.T, lower=True)
    var = np.einsum("ij,ij->j", V, V) + state.obs_var
    return mean, var


def predict(state: InfoState, basis: RffBasis, x) -> Predictive:
    feature_map(basis, x)  # shape check
    mean, var = predict_batch(state, basis, np.asarray(x, dtype=float)[None, :])
    return Predictive(float(mean[0]), float(var[0]))


def log_predictive_density(y, pred: Predictive | tuple) -> float | np.ndarray:
    """Gaussian log-density of ``y`` under a predictive (mean, variance)."""
    if isinstance(pred, Predictive):
        mean, var = pred.mean, pred.variance
    else:
        mean, var = pred
    mean = np.asarray(mean, dtype=float)
    var = np.asarray(var, dtype=float)
    r = np.asarray(y, dtype=float) - mean
    out = -0.5 * (_LOG_2PI + np.log(var) + r * r / var)
    return float(out) if np.ndim(out) == 0 else out
