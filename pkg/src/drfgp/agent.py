"""Per-agent steps of decentralized RF-GP learning.

An agent never sees another agent's observations. :func:`local_phase` only
touches the agent's own data and state, and :func:`fuse_phase` only touches
consensus output.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np

from . import ensemble
from .exceptions import NumericalDegeneracyError, ShapeError
from .gauss_info import (
    InfoState,
    LocalStats,
    apply_fused_stats,
    local_stats,
    log_predictive_density,
    predict_batch,
)
from .rff import RffBasis


@dataclass(frozen=True, eq=False)
class AgentState:
    agent_id: int
    models: tuple  # of (RffBasis, InfoState)
    log_weights: np.ndarray
    num_agents: int

    def __post_init__(self):
        if not self.models:
            raise ValueError("an agent needs at least one model")
        dims = {(b.num_features, b.dim) for b, _ in self.models}
        if len(dims) != 1:
            raise ShapeError(f"all models must share J and input dimension, got {dims}")
        lw = np.array(self.log_weights, dtype=float)
        if lw.shape != (len(self.models),):
            raise ShapeError(f"{len(self.models)} models but {lw.shape} log-weights")
        lw.setflags(write=False)
        object.__setattr__(self, "models", tuple(self.models))
        object.__setattr__(self, "log_weights", lw)

    @classmethod
    def initial(
        cls,
        agent_id: int,
        bases: Sequence[RffBasis],
        num_agents: int,
        prior_var: float = 1.0,
        obs_var: float = 1e-2,
    ) -> "AgentState":
        """Every model starts from the full prior; all weights equal."""
        models = tuple(
            (b, InfoState.prior(b.output_dim, prior_var, obs_var)) for b in bases
        )
        return cls(agent_id, models, np.zeros(len(models)), num_agents)

    @property
    def num_models(self) -> int:
        return len(self.models)

    @property
    def input_dim(self) -> int:
        return self.models[0][0].dim

    @property
    def weights(self) -> np.ndarray:
        return ensemble.normalize(self.log_weights)


@dataclass(frozen=True, eq=False)
class StepResult:
    """Pre-update predictions for one batch at one agent.

    ``model_means`` and ``model_vars`` have shape (batch, M); ``loglik`` holds
    each model's total log predictive density of the batch.
    """

    model_means: np.ndarray
    model_vars: np.ndarray
    weights: np.ndarray
    mixture_mean: np.ndarray
    loglik: np.ndarray


def predict_models(state: AgentState, X) -> tuple[np.ndarray, np.ndarray]:
    """Per-model predictive means and variances at the rows of ``X``."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != state.input_dim:
        raise ShapeError(f"expected inputs of shape (n, {state.input_dim}), got {X.shape}")
    out = [predict_batch(info, basis, X) for basis, info in state.models]
    means = np.stack([m for m, _ in out], axis=1)
    variances = np.stack([v for _, v in out], axis=1)
    return means, variances


def local_phase(state: AgentState, X, y) -> tuple[list[LocalStats], StepResult]:
    """Predict the new data with the current posterior, then summarize it.

    Parameters
    ----------
    state : AgentState
    X : array-like of shape (D,) or (batch, D)
    y : float or array-like of shape (batch,)
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if X.shape[0] != y.shape[0]:
        raise ShapeError(f"{X.shape[0]} inputs but {y.shape[0]} targets")
    means, variances = predict_models(state, X)
    w = state.weights
    loglik = log_predictive_density(y[:, None], (means, variances)).sum(axis=0)
    result = StepResult(
        model_means=means,
        model_vars=variances,
        weights=w,
        mixture_mean=ensemble.mixture_predict(means, variances, w),
        loglik=np.atleast_1d(loglik),
    )
    stats = [local_stats(basis, X, y, info.obs_var) for basis, info in state.models]
    return stats, result


def fuse_phase(state: AgentState, fused: Sequence[tuple]) -> AgentState:
    """Fold consensus averages ``(P_avg, s_avg)`` (one per model) into the posteriors.

    The average is scaled by the number of agents to estimate the network sum.
    """
    if len(fused) != state.num_models:
        raise ShapeError(f"{state.num_models} models but {len(fused)} fused payloads")
    n = state.num_agents
    models = []
    for m, ((basis, info), (P_avg, s_avg)) in enumerate(zip(state.models, fused)):
        try:
            info = apply_fused_stats(info, n * np.asarray(P_avg), n * np.asarray(s_avg))
        except NumericalDegeneracyError as exc:
            raise NumericalDegeneracyError(
                f"agent {state.agent_id}, model {m}: {exc}"
            ) from exc
        models.append((basis, info))
    return replace(state, models=tuple(models))


def update_weights(
    state: AgentState, loglik_increment, floor: float | None = ensemble.WEIGHT_FLOOR
) -> AgentState:
    """BMA step with an already-chosen log-likelihood increment (local or consensus)."""
    lw = ensemble.bma_local_update(state.log_weights, loglik_increment, floor)
    return replace(state, log_weights=lw)
