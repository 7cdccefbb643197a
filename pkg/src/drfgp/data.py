"""Delimited-text dataset ingestion, standardization and synthetic streams."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Union

import numpy as np

from .exceptions import IngestionError, SchemaError
from .rff import KernelSpec, features, sample_frequencies


@dataclass
class Dataset:
    """Inputs ``X`` (T, D) and targets ``y`` (T,), rows in file order."""

    X: np.ndarray
    y: np.ndarray
    feature_names: list = field(default_factory=list)
    target_name: str = "y"
    x_mean: Optional[np.ndarray] = None
    x_std: Optional[np.ndarray] = None
    y_mean: float = 0.0
    y_std: float = 1.0

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape

    def __len__(self) -> int:
        return len(self.y)


def load_dataset(
    path: Union[str, Path],
    target_column: Union[int, str] = -1,
    delimiter: str = ",",
    header: bool = True,
) -> Dataset:
    """Read a numeric delimited file and split off the target column.

    Parameters
    ----------
    path : str or Path
    target_column : int or str
        Column index (negative counts from the end) or header name.
    delimiter : str
    header : bool
        Whether the first line holds column names.

    Raises
    ------
    IngestionError
        A cell is empty or not a number; the message gives row and column.
    SchemaError
        The target column does not exist or rows have inconsistent widths.
    """
    path = Path(path)
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh, delimiter=delimiter) if r]
    if header:
        if not rows:
            raise SchemaError(f"{path}: missing header line")
        names, rows = [c.strip() for c in rows[0]], rows[1:]
    else:
        names = [f"x{i}" for i in range(len(rows[0]))] if rows else []
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    width = len(names)

    if isinstance(target_column, str) and not target_column.lstrip("-").isdigit():
        if target_column not in names:
            raise SchemaError(f"{path}: no column named {target_column!r} (have {names})")
        tcol = names.index(target_column)
    else:
        tcol = int(target_column)
        if not -width <= tcol < width:
            raise SchemaError(f"{path}: target column {tcol} out of range for {width} columns")
        tcol %= width

    data = np.empty((len(rows), width))
    first_line = 2 if header else 1
    for r, row in enumerate(rows):
        if len(row) != width:
            raise SchemaError(
                f"{path}: line {r + first_line} has {len(row)} fields, expected {width}"
            )
        for c, cell in enumerate(row):
            try:
                data[r, c] = float(cell)
            except ValueError:
                raise IngestionError(
                    f"{path}: cannot parse {cell!r} at line {r + first_line}, "
                    f"column {c + 1} ({names[c]})"
                ) from None
    if not np.all(np.isfinite(data)):
        r, c = np.argwhere(~np.isfinite(data))[0]
        raise IngestionError(
            f"{path}: missing or non-finite value at line {r + first_line}, column {c + 1}"
        )
    keep = [c for c in range(width) if c != tcol]
    return Dataset(
        X=data[:, keep],
        y=data[:, tcol],
        feature_names=[names[c] for c in keep],
        target_name=names[tcol],
    )


def standardize(
    ds: Dataset,
    train_size: Optional[int] = None,
    inputs: bool = True,
    targets: bool = False,
) -> Dataset:
    """Center and scale inputs (and optionally targets) using the first ``train_size`` rows only.

    Constant columns are centered but left unscaled.
    """
    n = len(ds) if train_size is None else int(train_size)
    if n < 1:
        raise ValueError("standardization needs at least one training row")
    out = ds
    if inputs:
        mu = ds.X[:n].mean(axis=0)
        sd = ds.X[:n].std(axis=0)
        sd = np.where(sd > 0, sd, 1.0)
        out = replace(ds, X=(ds.X - mu) / sd, x_mean=mu, x_std=sd)
    if targets:
        ym, ys = float(ds.y[:n].mean()), float(ds.y[:n].std())
        ys = ys if ys > 0 else 1.0
        out = replace(out, y=(ds.y - ym) / ys, y_mean=ym, y_std=ys)
    return out


def make_se_stream(
    num_samples: int,
    dim: int = 1,
    lengthscale: float = 1.0,
    noise_std: float = 0.1,
    low: float = -5.0,
    high: float = 5.0,
    seed: int = 0,
    num_features: int = 2000,
) -> Dataset:
    """Noisy samples of a random function drawn from an SE-kernel GP prior.

    The function is a dense random-feature draw (``num_features``
    frequencies), which is close to an exact GP sample for the default size.
    """
    rng = np.random.default_rng(seed)
    basis = sample_frequencies(
        KernelSpec.isotropic(lengthscale, dim), num_features, int(rng.integers(2**63))
    )
    theta = rng.standard_normal(basis.output_dim)
    X = rng.uniform(low, high, size=(num_samples, dim))
    f = features(basis, X) @ theta
    y = f + noise_std * rng.standard_normal(num_samples)
    return Dataset(X, y, [f"x{i}" for i in range(dim)], "y")


def write_dataset(ds: Dataset, path: Union[str, Path], delimiter: str = ",") -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter=delimiter)
        w.writerow(list(ds.feature_names) + [ds.target_name])
        for xr, yr in zip(ds.X, ds.y):
            w.writerow([repr(float(v)) for v in xr] + [repr(float(yr))])
