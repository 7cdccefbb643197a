"""Decentralized online Gaussian-process ensembles with random Fourier features."""

from .consensus import CommGraph, WeightMatrix, build_weights, consensus_round, run_consensus
from .estimators import DecentralizedGPEnsemble, OnlineRFGPRegressor, RandomFourierFeatures
from .exceptions import DRFGPError
from .gauss_info import InfoState, LocalStats, Predictive
from .rff import KernelSpec, RffBasis, exact_kernel, feature_map, sample_frequencies
from .simnet import ExperimentConfig, MetricsLog, Network, run_experiment

__version__ = "0.1.0"

__all__ = [
    "CommGraph",
    "WeightMatrix",
    "build_weights",
    "consensus_round",
    "run_consensus",
    "DecentralizedGPEnsemble",
    "OnlineRFGPRegressor",
    "RandomFourierFeatures",
    "DRFGPError",
    "InfoState",
    "LocalStats",
    "Predictive",
    "KernelSpec",
    "RffBasis",
    "exact_kernel",
    "feature_map",
    "sample_frequencies",
    "ExperimentConfig",
    "MetricsLog",
    "Network",
    "run_experiment",
]
