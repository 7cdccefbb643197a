"""scikit-learn compatible estimators built on the functional core."""

from __future__ import annotations

import numbers

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils import check_random_state
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from . import gauss_info
from .consensus import CommGraph
from .rff import KernelSpec, features, sample_frequencies
from .simnet import ExperimentConfig, Network, build_bases, build_graph


def _seed(random_state) -> int:
    if isinstance(random_state, numbers.Integral):
        return int(random_state)
    return int(check_random_state(random_state).randint(np.iinfo(np.int32).max))


def _kernel_spec(lengthscale, dim: int) -> KernelSpec:
    ls = np.atleast_1d(np.asarray(lengthscale, dtype=float))
    if ls.size == 1:
        ls = np.full(dim, ls[0])
    if ls.size != dim:
        raise ValueError(f"{ls.size} lengthscales for {dim} input features")
    return KernelSpec(ls)


class RandomFourierFeatures(TransformerMixin, BaseEstimator):
    """Random Fourier feature map for the SE-ARD kernel.

    Parameters
    ----------
    lengthscale : float or array-like of shape (n_features,)
    n_components : int
        Number of frequencies J; the output has ``2 * n_components`` columns.
    random_state : int, RandomState instance or None

    Attributes
    ----------
    basis_ : RffBasis
    n_features_in_ : int
    """

    def __init__(self, lengthscale=1.0, n_components=50, random_state=None):
        self.lengthscale = lengthscale
        self.n_components = n_components
        self.random_state = random_state

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        spec = _kernel_spec(self.lengthscale, X.shape[1])
        self.basis_ = sample_frequencies(spec, self.n_components, _seed(self.random_state))
        return self

    def transform(self, X):
        check_is_fitted(self, "basis_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return features(self.basis_, X)


class OnlineRFGPRegressor(RegressorMixin, BaseEstimator):
    """Centralized random-feature GP regressor with exact online updates.

    ``partial_fit`` folds new data into the posterior in information form, so
    fitting in chunks gives the same posterior as one ``fit`` on all data.

    Parameters
    ----------
    lengthscale : float or array-like
    n_components : int
    prior_var : float
        Prior variance of the feature weights.
    obs_var : float
        Observation-noise variance.
    random_state : int, RandomState instance or None

    Attributes
    ----------
    basis_ : RffBasis
    state_ : InfoState
    coef_ : ndarray of shape (2 * n_components,)
        Posterior mean of the feature weights.
    """

    def __init__(self, lengthscale=1.0, n_components=50, prior_var=1.0, obs_var=1e-2,
                 random_state=None):
        self.lengthscale = lengthscale
        self.n_components = n_components
        self.prior_var = prior_var
        self.obs_var = obs_var
        self.random_state = random_state

    def fit(self, X, y):
        for attr in ("basis_", "state_"):
            self.__dict__.pop(attr, None)
        return self.partial_fit(X, y)

    def partial_fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if not hasattr(self, "basis_"):
            self.n_features_in_ = X.shape[1]
            spec = _kernel_spec(self.lengthscale, X.shape[1])
            self.basis_ = sample_frequencies(spec, self.n_components, _seed(self.random_state))
            self.state_ = gauss_info.InfoState.prior(
                self.basis_.output_dim, self.prior_var, self.obs_var
            )
        elif X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        stats = gauss_info.local_stats(self.basis_, X, y, self.obs_var)
        self.state_ = gauss_info.apply_fused_stats(self.state_, stats.P, stats.s)
        return self

    @property
    def coef_(self):
        check_is_fitted(self, "state_")
        return gauss_info.posterior_moments(self.state_)[0]

    def predict(self, X, return_std=False):
        """Predictive mean, and optionally predictive std (noise included)."""
        check_is_fitted(self, "state_")
        X = check_array(X)
        mean, var = gauss_info.predict_batch(self.state_, self.basis_, X)
        return (mean, np.sqrt(var)) if return_std else mean


class DecentralizedGPEnsemble(RegressorMixin, BaseEstimator):
    """Ensemble of random-feature GPs learned by a network of agents.

    ``fit`` streams the rows of ``X`` round-robin to ``n_agents`` agents; each
    time step ends with ``consensus_rounds`` rounds of neighbour averaging.
    Agents combine their models by online Bayesian model averaging.

    Parameters
    ----------
    n_agents : int
    lengthscales : sequence
        One entry per model, a float or a per-feature vector.
    n_components : int
    consensus_rounds : int
    edge_probability : float
        Edge probability of the random communication graph.
    graph : {"random", "complete", "path", "ring"} or CommGraph
    weight_scheme : {"metropolis", "uniform"}
    bma_mode : {"independent_consensus", "local"}
    prior_var, obs_var : float
    random_state : int or None

    Attributes
    ----------
    network_ : Network
    weights_ : ndarray of shape (n_agents, n_models)
        Normalized model weights at each agent.
    """

    def __init__(self, n_agents=5, lengthscales=(0.1, 1.0, 10.0), n_components=50,
                 consensus_rounds=10, edge_probability=0.25, graph="random",
                 weight_scheme="metropolis", bma_mode="independent_consensus",
                 prior_var=1.0, obs_var=1e-2, random_state=0):
        self.n_agents = n_agents
        self.lengthscales = lengthscales
        self.n_components = n_components
        self.consensus_rounds = consensus_rounds
        self.edge_probability = edge_probability
        self.graph = graph
        self.weight_scheme = weight_scheme
        self.bma_mode = bma_mode
        self.prior_var = prior_var
        self.obs_var = obs_var
        self.random_state = random_state

    def _config(self) -> ExperimentConfig:
        return ExperimentConfig(
            num_agents=self.n_agents,
            edge_probability=self.edge_probability,
            graph=self.graph if isinstance(self.graph, str) else "random",
            consensus_rounds=self.consensus_rounds,
            weight_scheme=self.weight_scheme,
            lengthscales=list(self.lengthscales),
            num_features=self.n_components,
            prior_var=self.prior_var,
            obs_var=self.obs_var,
            seed=_seed(self.random_state),
            bma_mode=self.bma_mode,
            holdout_size=0,
        ).validate()

    def fit(self, X, y):
        self.__dict__.pop("network_", None)
        return self.partial_fit(X, y)

    def partial_fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        if not hasattr(self, "network_"):
            config = self._config()
            graph = self.graph if isinstance(self.graph, CommGraph) else build_graph(config)
            self.n_features_in_ = X.shape[1]
            self.network_ = Network(
                build_bases(config, X.shape[1]), graph,
                consensus_rounds=config.consensus_rounds,
                weight_scheme=config.weight_scheme,
                bma_mode=config.bma_mode,
                prior_var=config.prior_var,
                obs_var=config.obs_var,
            )
        elif X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        N = self.network_.num_agents
        empty = (X[:0], y[:0])
        for lo in range(0, len(y), N):
            self.network_.step([
                (X[i:i + 1], y[i:i + 1]) if i < len(y) else empty
                for i in range(lo, lo + N)
            ])
        return self

    @property
    def weights_(self):
        check_is_fitted(self, "network_")
        return np.array([a.weights for a in self.network_.agents])

    def predict(self, X, agent=None):
        """Mixture-mean prediction of one agent, or the average over agents."""
        check_is_fitted(self, "network_")
        X = check_array(X)
        if agent is not None:
            return self.network_.predict(X, agent=agent)
        return self.network_.predict(X).mean(axis=0)
