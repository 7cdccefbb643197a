"""Deterministic multi-agent simulator.

Each time step runs three barriers in order: every agent predicts and
summarizes its new data, all payloads go through ``L`` synchronous consensus
rounds, then every agent folds the consensus output into its posteriors and
BMA weights. Everything random is derived from one master seed.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import logging
import time
import zlib
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import agent as agent_mod
from .consensus import (
    CommGraph,
    WeightMatrix,
    build_weights,
    flatten_payload,
    payload_size,
    run_consensus,
    unflatten_payload,
)
from .exceptions import ConfigError, DRFGPError, GraphGenerationError, SnapshotError
from .rff import KernelSpec, RffBasis, sample_frequencies

logger = logging.getLogger(__name__)

BMA_MODES = ("local", "independent_consensus")
GRAPH_KINDS = ("random", "complete", "path", "ring")
MAX_GRAPH_DRAWS = 10_000
SNAPSHOT_VERSION = 1


@dataclass
class ExperimentConfig:
    """All knobs of one experiment. Defaults match the reference setup (N=5, J=50, L=10)."""

    num_agents: int = 5
    edge_probability: float = 0.25
    graph: str = "random"
    consensus_rounds: int = 10
    weight_scheme: str = "metropolis"
    lengthscales: list = field(default_factory=lambda: [0.1, 1.0, 10.0])
    num_features: int = 50
    prior_var: float = 1.0
    obs_var: float = 1e-2
    seed: int = 0
    bma_mode: str = "independent_consensus"
    weight_floor: Optional[float] = 1e-12
    holdout_size: int = 1000
    shuffle_seed: Optional[int] = None
    snapshot_every: int = 0
    # dataset reference and ingestion schema
    dataset: Optional[str] = None
    target_column: object = -1
    delimiter: str = ","
    header: bool = True
    standardize: bool = True
    standardize_targets: bool = True

    def validate(self, dataset_size: Optional[int] = None) -> "ExperimentConfig":
        if int(self.num_agents) != self.num_agents or self.num_agents < 1:
            raise ConfigError(f"num_agents must be >= 1, got {self.num_agents}")
        if not 0 < self.edge_probability <= 1:
            raise ConfigError(f"edge_probability must be in (0, 1], got {self.edge_probability}")
        if self.graph not in GRAPH_KINDS:
            raise ConfigError(f"graph must be one of {GRAPH_KINDS}, got {self.graph!r}")
        if self.consensus_rounds < 0:
            raise ConfigError("consensus_rounds must be >= 0")
        if self.weight_scheme not in ("uniform", "metropolis"):
            raise ConfigError(f"unknown weight_scheme {self.weight_scheme!r}")
        if self.bma_mode not in BMA_MODES:
            raise ConfigError(f"bma_mode must be one of {BMA_MODES}, got {self.bma_mode!r}")
        if not self.lengthscales:
            raise ConfigError("at least one model lengthscale is required")
        if self.num_features < 1:
            raise ConfigError("num_features must be >= 1")
        if not (self.prior_var > 0 and self.obs_var > 0):
            raise ConfigError("prior_var and obs_var must be positive")
        if self.holdout_size < 0:
            raise ConfigError("holdout_size must be >= 0")
        if dataset_size is not None and self.holdout_size >= dataset_size:
            raise ConfigError(
                f"holdout_size ({self.holdout_size}) must be smaller than the "
                f"dataset ({dataset_size} rows)"
            )
        return self

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def derive_seed(master: int, name: str) -> int:
    """Named 64-bit sub-seed of ``master``."""
    ss = np.random.SeedSequence(int(master), spawn_key=(zlib.crc32(name.encode()),))
    return int(ss.generate_state(1, np.uint64)[0])


def random_graph(num_agents: int, edge_probability: float, seed: int) -> CommGraph:
    """Connected Erdos-Renyi graph, by rejection sampling from one generator."""
    if num_agents < 1:
        raise ValueError("num_agents must be >= 1")
    rng = np.random.default_rng(seed)
    for _ in range(MAX_GRAPH_DRAWS):
        upper = np.triu(rng.random((num_agents, num_agents)) < edge_probability, 1)
        graph = CommGraph.from_adjacency(upper | upper.T)
        if graph.is_connected():
            return graph
    raise GraphGenerationError(
        f"no connected graph with N={num_agents}, p={edge_probability} "
        f"after {MAX_GRAPH_DRAWS} draws"
    )


def partition_stream(X, y, num_agents: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Round-robin split: sample ``i`` goes to agent ``i % N`` at step ``i // N``."""
    X = np.asarray(X)
    y = np.asarray(y)
    if len(X) == 0:
        raise ValueError("dataset is empty")
    return [(X[n::num_agents], y[n::num_agents]) for n in range(num_agents)]


def build_graph(config: ExperimentConfig) -> CommGraph:
    n = config.num_agents
    if config.graph == "complete" or n == 1:
        return CommGraph.complete(n)
    if config.graph == "path":
        return CommGraph.path(n)
    if config.graph == "ring":
        return CommGraph.ring(n)
    return random_graph(n, config.edge_probability, derive_seed(config.seed, "graph"))


def build_bases(config: ExperimentConfig, input_dim: int) -> list[RffBasis]:
    """One shared basis per model; all agents get the same frequencies."""
    bases = []
    for m, ls in enumerate(config.lengthscales):
        ls = np.atleast_1d(np.asarray(ls, dtype=float))
        if ls.size == 1:
            ls = np.full(input_dim, ls[0])
        if ls.size != input_dim:
            raise ConfigError(
                f"model {m} has {ls.size} lengthscales but inputs have {input_dim} columns"
            )
        seed = derive_seed(config.seed, f"frequencies/{m}")
        bases.append(sample_frequencies(KernelSpec(ls), config.num_features, seed))
    return bases


@dataclass
class MetricsLog:
    """One record per prediction.

    Training records (``phase == "train"``) are prequential predictions, one
    per (agent, step). Holdout records are frozen-posterior predictions, one
    per (agent, holdout row); their ``step`` is the holdout row number.
    """

    num_agents: int
    num_models: int
    phase: np.ndarray
    step: np.ndarray
    agent: np.ndarray
    index: np.ndarray
    target: np.ndarray
    prediction: np.ndarray
    model_predictions: np.ndarray
    weights: np.ndarray
    step_times: Optional[np.ndarray] = field(default=None, compare=False, repr=False)

    def __len__(self) -> int:
        return len(self.phase)

    def section(self, phase: str) -> "MetricsLog":
        mask = self.phase == phase
        return dataclasses.replace(
            self,
            **{
                k: getattr(self, k)[mask]
                for k in ("phase", "step", "agent", "index", "target", "prediction",
                          "model_predictions", "weights")
            },
        )


class _Recorder:
    def __init__(self, num_models: int):
        self.rows: list[tuple] = []
        self.num_models = num_models

    def add(self, phase, step, agent, index, target, prediction, model_preds, weights):
        self.rows.append((phase, step, agent, index, target, prediction, model_preds, weights))

    def build(self, num_agents: int) -> MetricsLog:
        M = self.num_models
        cols = list(zip(*self.rows)) if self.rows else [()] * 8
        return MetricsLog(
            num_agents=num_agents,
            num_models=M,
            phase=np.array(cols[0], dtype="<U8"),
            step=np.array(cols[1], dtype=np.int64),
            agent=np.array(cols[2], dtype=np.int64),
            index=np.array(cols[3], dtype=np.int64),
            target=np.array(cols[4], dtype=float),
            prediction=np.array(cols[5], dtype=float),
            model_predictions=np.array(cols[6], dtype=float).reshape(-1, M),
            weights=np.array(cols[7], dtype=float).reshape(-1, M),
        )


class Network:
    """All agents of one run plus the communication graph.

    Parameters
    ----------
    bases : list of RffBasis
        One basis per ensemble model, shared by every agent.
    graph : CommGraph
    consensus_rounds : int
    weight_scheme : {"metropolis", "uniform"}
    bma_mode : {"independent_consensus", "local"}
    on_exchange : callable, optional
        Called as ``on_exchange(step, round, payloads)`` with the ``(N, K)``
        array every agent broadcasts in a round. Meant for instrumentation.
    """

    def __init__(
        self,
        bases: Sequence[RffBasis],
        graph: CommGraph,
        consensus_rounds: int = 10,
        weight_scheme: str = "metropolis",
        bma_mode: str = "independent_consensus",
        prior_var: float = 1.0,
        obs_var: float = 1e-2,
        weight_floor: Optional[float] = 1e-12,
        on_exchange: Optional[Callable] = None,
    ):
        if bma_mode not in BMA_MODES:
            raise ConfigError(f"bma_mode must be one of {BMA_MODES}, got {bma_mode!r}")
        self.bases = list(bases)
        self.graph = graph
        self.weights: WeightMatrix = build_weights(graph, weight_scheme)
        self.consensus_rounds = int(consensus_rounds)
        self.bma_mode = bma_mode
        self.weight_floor = weight_floor
        self.on_exchange = on_exchange
        self.t = 0
        n = graph.num_agents
        self.agents = [
            agent_mod.AgentState.initial(i, self.bases, n, prior_var, obs_var)
            for i in range(n)
        ]
        self._feat_dim = self.bases[0].output_dim

    @property
    def num_agents(self) -> int:
        return self.graph.num_agents

    @property
    def num_models(self) -> int:
        return len(self.bases)

    @property
    def payload_width(self) -> int:
        """Reals each agent sends to each neighbour per round."""
        return self.num_models * payload_size(self._feat_dim) + self.num_models

    def _consensus(self, payloads: np.ndarray) -> np.ndarray:
        out = payloads
        for r in range(self.consensus_rounds):
            if self.on_exchange is not None:
                self.on_exchange(self.t, r, out.copy())
            out = run_consensus(out, self.weights, 1)
        return out

    def step(self, batches: Sequence[tuple]) -> list[agent_mod.StepResult]:
        """Advance one time step.

        ``batches[n]`` is agent ``n``'s ``(X, y)`` for this step; an empty
        batch means the agent observed nothing and contributes zeros.
        """
        if len(batches) != self.num_agents:
            raise ValueError(f"expected {self.num_agents} batches, got {len(batches)}")
        self.t += 1
        M = self.num_models
        results = []
        payloads = np.empty((self.num_agents, self.payload_width))
        for n, (state, (Xn, yn)) in enumerate(zip(self.agents, batches)):
            try:
                stats, res = agent_mod.local_phase(state, Xn, yn)
            except DRFGPError as exc:
                raise type(exc)(f"step {self.t}, agent {n}: {exc}") from exc
            results.append(res)
            parts = [flatten_payload(st.P, st.s) for st in stats]
            parts.append(res.loglik)
            payloads[n] = np.concatenate(parts)

        mixed = self._consensus(payloads)

        width = payload_size(self._feat_dim)
        for n, state in enumerate(self.agents):
            row = mixed[n]
            fused = [
                unflatten_payload(row[m * width:(m + 1) * width], self._feat_dim)
                for m in range(M)
            ]
            try:
                state = agent_mod.fuse_phase(state, fused)
            except DRFGPError as exc:
                raise type(exc)(f"step {self.t}: {exc}") from exc
            if self.bma_mode == "local":
                inc = results[n].loglik
            else:
                inc = self.num_agents * row[M * width:]
            self.agents[n] = agent_mod.update_weights(state, inc, self.weight_floor)
        return results

    def predict(self, X, agent: Optional[int] = None) -> np.ndarray:
        """Mixture means from frozen posteriors, shape (N, n) or (n,) for one agent."""
        X = np.asarray(X, dtype=float)
        agents = self.agents if agent is None else [self.agents[agent]]
        out = []
        for state in agents:
            means, _ = agent_mod.predict_models(state, X)
            out.append(means @ state.weights)
        out = np.array(out)
        return out if agent is None else out[0]

    def predict_models(self, X, agent: int) -> tuple[np.ndarray, np.ndarray]:
        return agent_mod.predict_models(self.agents[agent], np.asarray(X, dtype=float))

    def snapshot(self, path, config_hash: str = "") -> Path:
        """Write every agent's posteriors and log-weights to an ``.npz`` file."""
        path = Path(path)
        arrays = {
            "version": np.array(SNAPSHOT_VERSION),
            "config_hash": np.array(config_hash),
            "step": np.array(self.t),
            "num_agents": np.array(self.num_agents),
            "num_models": np.array(self.num_models),
        }
        for n, state in enumerate(self.agents):
            arrays[f"agent{n}/log_weights"] = state.log_weights
            for m, (_, info) in enumerate(state.models):
                arrays[f"agent{n}/model{m}/precision"] = info.precision
                arrays[f"agent{n}/model{m}/info_vec"] = info.info_vec
        with open(path, "wb") as fh:
            np.savez(fh, **arrays)
        return path


def load_snapshot(path) -> dict:
    """Read a snapshot written by :meth:`Network.snapshot`."""
    try:
        with np.load(path, allow_pickle=False) as z:
            data = {k: z[k] for k in z.files}
    except (OSError, ValueError) as exc:
        raise SnapshotError(f"cannot read snapshot {path}: {exc}") from exc
    if "version" not in data or int(data["version"]) != SNAPSHOT_VERSION:
        raise SnapshotError(f"{path}: unsupported snapshot version")
    return data


def summarize_snapshot(data: dict) -> dict:
    from .ensemble import normalize
    from .gauss_info import InfoState, posterior_moments

    N, M = int(data["num_agents"]), int(data["num_models"])
    agents = []
    for n in range(N):
        models = []
        for m in range(M):
            D = data[f"agent{n}/model{m}/precision"]
            eta = data[f"agent{n}/model{m}/info_vec"]
            mean, _ = posterior_moments(InfoState(D, eta, 1.0, 1.0))
            models.append({
                "dim": int(eta.shape[0]),
                "precision_trace": float(np.trace(D)),
                "mean_norm": float(np.linalg.norm(mean)),
            })
        agents.append({
            "agent": n,
            "weights": normalize(data[f"agent{n}/log_weights"]).tolist(),
            "models": models,
        })
    return {
        "version": int(data["version"]),
        "config_hash": str(data["config_hash"]),
        "step": int(data["step"]),
        "agents": agents,
    }


def run_experiment(
    config: ExperimentConfig,
    X,
    y,
    snapshot_dir=None,
    graph: Optional[CommGraph] = None,
    on_exchange: Optional[Callable] = None,
    network_out: Optional[list] = None,
) -> MetricsLog:
    """Run the streaming experiment on ``(X, y)``.

    Rows are used in the given order (shuffling and standardization are the
    caller's job, see :func:`drfgp.cli.prepare_dataset`). The last
    ``config.holdout_size`` rows are held out. The rest are streamed
    round-robin to the agents; each prediction is logged before the data it
    predicts is used. After the stream ends, every agent predicts every
    holdout row with its frozen posterior.

    ``graph`` overrides the configured topology. If ``network_out`` is a list,
    the final :class:`Network` is appended to it.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ConfigError(f"bad dataset shapes {X.shape} / {y.shape}")
    config.validate(dataset_size=len(y))
    n_train = len(y) - config.holdout_size
    Xtr, ytr, Xho, yho = X[:n_train], y[:n_train], X[n_train:], y[n_train:]

    if graph is None:
        graph = build_graph(config)
    elif graph.num_agents != config.num_agents:
        raise ConfigError("graph size does not match num_agents")
    net = Network(
        build_bases(config, X.shape[1]),
        graph,
        consensus_rounds=config.consensus_rounds,
        weight_scheme=config.weight_scheme,
        bma_mode=config.bma_mode,
        prior_var=config.prior_var,
        obs_var=config.obs_var,
        weight_floor=config.weight_floor,
        on_exchange=on_exchange,
    )
    N, D = config.num_agents, X.shape[1]
    rec = _Recorder(net.num_models)
    chash = config.config_hash()
    if snapshot_dir is not None:
        Path(snapshot_dir).mkdir(parents=True, exist_ok=True)

    num_steps = -(-n_train // N)
    step_times = np.empty(num_steps)
    empty = (np.empty((0, D)), np.empty(0))
    for t in range(num_steps):
        lo = t * N
        batches = [
            (Xtr[i:i + 1], ytr[i:i + 1]) if i < n_train else empty
            for i in range(lo, lo + N)
        ]
        t0 = time.perf_counter()
        results = net.step(batches)
        step_times[t] = time.perf_counter() - t0
        for n, res in enumerate(results):
            i = lo + n
            if i >= n_train:
                continue
            rec.add("train", t + 1, n, i, ytr[i], res.mixture_mean[0],
                    res.model_means[0], res.weights)
        if snapshot_dir is not None and config.snapshot_every and (t + 1) % config.snapshot_every == 0:
            net.snapshot(Path(snapshot_dir) / f"snapshot_{t + 1:07d}.npz", chash)
        if (t + 1) % 1000 == 0:
            logger.info("step %d/%d", t + 1, num_steps)

    if len(yho):
        for n, state in enumerate(net.agents):
            means, _ = agent_mod.predict_models(state, Xho)
            w = state.weights
            mix = means @ w
            for k in range(len(yho)):
                rec.add("holdout", k, n, n_train + k, yho[k], mix[k], means[k], w)
    if snapshot_dir is not None:
        net.snapshot(Path(snapshot_dir) / "snapshot_final.npz", chash)

    log = rec.build(N)
    log.step_times = step_times
    if network_out is not None:
        network_out.append(net)
    return log
