"""Average consensus on undirected graphs.

Agents hold equal-length payload vectors (stacked as the rows of an
``(N, K)`` array). One synchronous round replaces every row by a weighted
average of itself and its neighbours' rows.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .exceptions import InvalidGraphError, ShapeError

SCHEMES = ("uniform", "metropolis")


@dataclass(frozen=True)
class CommGraph:
    """Undirected communication graph on agents ``0..num_agents-1``."""

    num_agents: int
    edges: frozenset = field(default_factory=frozenset)

    def __post_init__(self):
        if int(self.num_agents) != self.num_agents or self.num_agents < 1:
            raise InvalidGraphError(f"num_agents must be >= 1, got {self.num_agents}")
        norm = set()
        for i, j in self.edges:
            i, j = int(i), int(j)
            if i == j:
                raise InvalidGraphError(f"self-loop at agent {i}")
            if not (0 <= i < self.num_agents and 0 <= j < self.num_agents):
                raise InvalidGraphError(f"edge ({i}, {j}) out of range")
            norm.add((min(i, j), max(i, j)))
        object.__setattr__(self, "num_agents", int(self.num_agents))
        object.__setattr__(self, "edges", frozenset(norm))

    @classmethod
    def complete(cls, n: int) -> "CommGraph":
        return cls(n, frozenset((i, j) for i in range(n) for j in range(i + 1, n)))

    @classmethod
    def path(cls, n: int) -> "CommGraph":
        return cls(n, frozenset((i, i + 1) for i in range(n - 1)))

    @classmethod
    def ring(cls, n: int) -> "CommGraph":
        if n < 3:
            return cls.path(n)
        return cls(n, frozenset((i, (i + 1) % n) for i in range(n)))

    @classmethod
    def from_adjacency(cls, A) -> "CommGraph":
        A = np.asarray(A, dtype=bool)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or not np.array_equal(A, A.T):
            raise InvalidGraphError("adjacency must be a symmetric square matrix")
        i, j = np.nonzero(np.triu(A, 1))
        return cls(A.shape[0], frozenset(zip(i.tolist(), j.tolist())))

    def adjacency(self) -> np.ndarray:
        A = np.zeros((self.num_agents, self.num_agents), dtype=bool)
        for i, j in self.edges:
            A[i, j] = A[j, i] = True
        return A

    def degrees(self) -> np.ndarray:
        return self.adjacency().sum(axis=1)

    def neighbors(self, i: int) -> list[int]:
        return np.flatnonzero(self.adjacency()[i]).tolist()

    def is_connected(self) -> bool:
        A = self.adjacency()
        seen = np.zeros(self.num_agents, dtype=bool)
        seen[0] = True
        queue = deque([0])
        while queue:
            i = queue.popleft()
            for j in np.flatnonzero(A[i] & ~seen):
                seen[j] = True
                queue.append(j)
        return bool(seen.all())

    def is_regular(self) -> bool:
        d = self.degrees()
        return bool(np.all(d == d[0]))


@dataclass(frozen=True, eq=False)
class WeightMatrix:
    weights: np.ndarray
    scheme: str

    @property
    def num_agents(self) -> int:
        return self.weights.shape[0]


def build_weights(graph: CommGraph, scheme: str = "metropolis") -> WeightMatrix:
    """Consensus weights for ``graph``.

    ``uniform``: each agent averages itself and its neighbours equally,
    ``1 / (deg(i) + 1)``. Row-stochastic only.

    ``metropolis``: ``1 / (1 + max(deg(i), deg(j)))`` on edges, remainder on
    the diagonal. Symmetric, hence doubly stochastic.
    """
    if scheme not in SCHEMES:
        raise ValueError(f"unknown weight scheme {scheme!r}; expected one of {SCHEMES}")
    if not graph.is_connected():
        raise InvalidGraphError("consensus requires a connected graph")
    A = graph.adjacency()
    deg = A.sum(axis=1)
    n = graph.num_agents
    if scheme == "uniform":
        W = (A | np.eye(n, dtype=bool)) / (deg + 1.0)[:, None]
    else:
        W = np.where(A, 1.0 / (1.0 + np.maximum.outer(deg, deg)), 0.0)
        W[np.diag_indices(n)] = 1.0 - W.sum(axis=1)
    W.setflags(write=False)
    return WeightMatrix(W, scheme)


def consensus_round(values, W: WeightMatrix) -> np.ndarray:
    """One synchronous exchange: ``new[n] = sum_j W[n, j] * values[j]``."""
    values = np.asarray(values, dtype=float)
    if values.ndim not in (1, 2) or values.shape[0] != W.num_agents:
        raise ShapeError(
            f"payload array must have one row per agent ({W.num_agents}), got {values.shape}"
        )
    return W.weights @ values


def run_consensus(values, W: WeightMatrix, rounds: int) -> np.ndarray:
    """Apply ``rounds`` consensus rounds; ``rounds == 0`` returns a copy of the input."""
    if rounds < 0:
        raise ValueError("rounds must be >= 0")
    out = np.array(values, dtype=float)
    for _ in range(rounds):
        out = consensus_round(out, W)
    return out


def second_largest_eigenvalue_modulus(W: WeightMatrix) -> float:
    """Convergence rate of consensus: second-largest eigenvalue modulus of ``W``."""
    ev = np.sort(np.abs(np.linalg.eigvals(W.weights)))[::-1]
    return float(ev[1]) if ev.size > 1 else 0.0


def limit_weights(W: WeightMatrix) -> np.ndarray:
    """Weights ``pi`` such that consensus converges to ``pi @ values``.

    ``pi`` is the left Perron vector of ``W``. It is uniform exactly when
    ``W`` is doubly stochastic.
    """
    vals, vecs = np.linalg.eig(W.weights.T)
    k = int(np.argmin(np.abs(vals - 1.0)))
    pi = np.real(vecs[:, k])
    return pi / pi.sum()


def consensus_sum_bias(W: WeightMatrix, values) -> np.ndarray:
    """Difference between ``N * lim(consensus)`` and the true sum of ``values``.

    Zero for doubly stochastic (Metropolis) weights; degree-biased for uniform
    weights on irregular graphs.
    """
    values = np.asarray(values, dtype=float)
    return W.num_agents * (limit_weights(W) @ values) - values.sum(axis=0)


def flatten_payload(P, s) -> np.ndarray:
    """Upper triangle of symmetric ``P`` (row-major) followed by ``s``."""
    P = np.asarray(P, dtype=float)
    iu = np.triu_indices(P.shape[0])
    return np.concatenate([P[iu], np.asarray(s, dtype=float)])


def unflatten_payload(vec, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Inverse of :func:`flatten_payload`; the matrix comes back exactly symmetric."""
    vec = np.asarray(vec, dtype=float)
    ntri = dim * (dim + 1) // 2
    if vec.shape != (ntri + dim,):
        raise ShapeError(f"payload of length {vec.shape} does not match dim {dim}")
    P = np.zeros((dim, dim))
    iu = np.triu_indices(dim)
    P[iu] = vec[:ntri]
    P.T[iu] = vec[:ntri]
    return P, vec[ntri:].copy()


def payload_size(dim: int) -> int:
    return dim * (dim + 1) // 2 + dim
