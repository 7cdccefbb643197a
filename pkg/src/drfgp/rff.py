"""Random Fourier features for the squared-exponential ARD kernel."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .exceptions import InvalidSpecError, ShapeError

__all__ = [
    "KernelSpec",
    "RffBasis",
    "SAMPLERS",
    "sample_frequencies",
    "feature_map",
    "features",
    "exact_kernel",
    "kernel_matrix",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class KernelSpec:
    """SE-ARD kernel hyperparameters.

    Parameters
    ----------
    lengthscales : array-like of shape (D,)
        One strictly positive lengthscale per input dimension.
    kind : str
        Kernel family. Only ``"se-ard"`` is implemented.
    """

    lengthscales: np.ndarray
    kind: str = "se-ard"

    def __post_init__(self):
        ls = np.atleast_1d(np.asarray(self.lengthscales, dtype=float))
        if ls.ndim != 1 or ls.size < 1:
            raise InvalidSpecError("lengthscales must be a non-empty vector")
        if not np.all(np.isfinite(ls)) or np.any(ls <= 0):
            raise InvalidSpecError(f"lengthscales must be finite and > 0, got {ls}")
        if self.kind != "se-ard":
            raise InvalidSpecError(f"unsupported kernel kind {self.kind!r}")
        object.__setattr__(self, "lengthscales", _frozen(ls))

    @classmethod
    def isotropic(cls, lengthscale: float, dim: int) -> "KernelSpec":
        return cls(np.full(dim, float(lengthscale)))

    @property
    def dim(self) -> int:
        return self.lengthscales.size


@dataclass(frozen=True)
class RffBasis:
    """Sampled spectral frequencies defining a feature map.

    ``frequencies`` has one row per frequency (``num_features`` rows) and one
    column per input dimension.
    """

    frequencies: np.ndarray
    spec: KernelSpec
    seed: int
    num_features: int = field(init=False)

    def __post_init__(self):
        freqs = np.asarray(self.frequencies, dtype=float)
        if freqs.ndim != 2 or freqs.shape[1] != self.spec.dim or freqs.shape[0] < 1:
            raise ShapeError(
                f"frequencies must be (J, {self.spec.dim}), got {freqs.shape}"
            )
        object.__setattr__(self, "frequencies", _frozen(freqs))
        object.__setattr__(self, "num_features", freqs.shape[0])

    @property
    def dim(self) -> int:
        return self.spec.dim

    @property
    def output_dim(self) -> int:
        return 2 * self.num_features


def _iid_gaussian(spec: KernelSpec, num_features: int, rng: np.random.Generator):
    return rng.standard_normal((num_features, spec.dim)) / spec.lengthscales


# Strategy hook: name -> f(spec, J, rng) returning a (J, D) matrix.
SAMPLERS: dict[str, Callable[[KernelSpec, int, np.random.Generator], np.ndarray]] = {
    "iid": _iid_gaussian,
}


def sample_frequencies(
    spec: KernelSpec, num_features: int, seed: int, sampler: str = "iid"
) -> RffBasis:
    """Draw ``num_features`` frequencies from the kernel's spectral density.

    Coordinate ``d`` of every frequency is Gaussian with standard deviation
    ``1 / lengthscales[d]``. The result depends only on ``(spec, num_features,
    seed, sampler)``.
    """
    if not isinstance(spec, KernelSpec):
        raise InvalidSpecError("spec must be a KernelSpec")
    if int(num_features) != num_features or num_features < 1:
        raise InvalidSpecError(f"num_features must be a positive integer, got {num_features}")
    try:
        draw = SAMPLERS[sampler]
    except KeyError:
        raise InvalidSpecError(f"unknown frequency sampler {sampler!r}") from None
    rng = np.random.default_rng(seed)
    return RffBasis(draw(spec, int(num_features), rng), spec, int(seed))


def features(basis: RffBasis, X) -> np.ndarray:
    """Feature matrix of shape (n, 2J), one row per input row.

    Columns interleave ``sin`` and ``cos`` of each projection, scaled by
    ``1/sqrt(J)``.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[1] != basis.dim:
        raise ShapeError(f"expected inputs of shape (n, {basis.dim}), got {X.shape}")
    proj = X @ basis.frequencies.T
    out = np.empty((X.shape[0], basis.output_dim))
    out[:, 0::2] = np.sin(proj)
    out[:, 1::2] = np.cos(proj)
    out /= np.sqrt(basis.num_features)
    return out


def feature_map(basis: RffBasis, x) -> np.ndarray:
    """Feature vector of a single input, length 2J."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.shape[0] != basis.dim:
        raise ShapeError(f"expected an input of length {basis.dim}, got shape {x.shape}")
    return features(basis, x[None, :])[0]


def exact_kernel(spec: KernelSpec, x, x_prime) -> float:
    """SE-ARD kernel value, the Fourier partner of the frequency sampler.

    ``exp(-sum_d (x_d - x'_d)**2 / (2 * lengthscales[d]**2))``
    """
    x = np.asarray(x, dtype=float)
    x_prime = np.asarray(x_prime, dtype=float)
    if x.shape != (spec.dim,) or x_prime.shape != (spec.dim,):
        raise ShapeError(
            f"expected inputs of length {spec.dim}, got {x.shape} and {x_prime.shape}"
        )
    z = (x - x_prime) / spec.lengthscales
    return float(np.exp(-0.5 * z @ z))


def kernel_matrix(spec: KernelSpec, X, Y) -> np.ndarray:
    """Exact kernel between every row of ``X`` and every row of ``Y``."""
    X = np.asarray(X, dtype=float) / spec.lengthscales
    Y = np.asarray(Y, dtype=float) / spec.lengthscales
    sq = (X * X).sum(1)[:, None] + (Y * Y).sum(1)[None, :] - 2.0 * X @ Y.T
    return np.exp(-0.5 * np.maximum(sq, 0.0))
