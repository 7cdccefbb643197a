"""Metrics over a :class:`~drfgp.simnet.MetricsLog` and its on-disk format.

The metrics file is comma-separated text, one record per prediction::

    # drfgp-metrics v1 num_agents=<N> num_models=<M>
    phase,step,agent,index,target,prediction,pred_0..pred_{M-1},weight_0..weight_{M-1}

Floats are written with ``repr`` so reading a file back gives bit-identical
values.
"""

from __future__ import annotations

import csv
import re
from pathlib import Path

import numpy as np

from .exceptions import IngestionError
from .simnet import MetricsLog, _Recorder

_MAGIC = "# drfgp-metrics v1"


def _fmt(v) -> str:
    return repr(float(v))


def write_metrics_log(log: MetricsLog, path) -> None:
    M = log.num_models
    with open(path, "w", newline="") as fh:
        fh.write(f"{_MAGIC} num_agents={log.num_agents} num_models={M}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(
            ["phase", "step", "agent", "index", "target", "prediction"]
            + [f"pred_{m}" for m in range(M)]
            + [f"weight_{m}" for m in range(M)]
        )
        for r in range(len(log)):
            w.writerow(
                [log.phase[r], int(log.step[r]), int(log.agent[r]), int(log.index[r]),
                 _fmt(log.target[r]), _fmt(log.prediction[r])]
                + [_fmt(v) for v in log.model_predictions[r]]
                + [_fmt(v) for v in log.weights[r]]
            )


def read_metrics_log(path) -> MetricsLog:
    path = Path(path)
    with open(path, newline="") as fh:
        first = fh.readline()
        m = re.match(rf"{re.escape(_MAGIC)} num_agents=(\d+) num_models=(\d+)", first)
        if not m:
            raise IngestionError(f"{path}: not a drfgp metrics file")
        N, M = int(m.group(1)), int(m.group(2))
        reader = csv.reader(fh)
        next(reader)
        rec = _Recorder(M)
        for lineno, row in enumerate(reader, start=3):
            try:
                rec.add(row[0], int(row[1]), int(row[2]), int(row[3]),
                        float(row[4]), float(row[5]),
                        [float(v) for v in row[6:6 + M]],
                        [float(v) for v in row[6 + M:6 + 2 * M]])
            except (ValueError, IndexError) as exc:
                raise IngestionError(f"{path}: bad record at line {lineno}: {exc}") from None
    return rec.build(N)


def running_mse(log: MetricsLog, n_max: int) -> list[tuple[int, float]]:
    """Running MSE sampled every ``n_max`` steps.

    ``MSE(t)`` averages the squared errors of the training predictions made
    at steps ``n_max, 2*n_max, ..., floor(t/n_max)*n_max`` over all agents
    that observed data at those steps. One point is returned for every
    multiple of ``n_max`` up to the last step; ``MSE(t)`` is constant in
    between.
    """
    if n_max < 1:
        raise ValueError("n_max must be a positive integer")
    train = log.phase == "train"
    steps = log.step[train]
    err2 = (log.prediction[train] - log.target[train]) ** 2
    if steps.size == 0:
        return []
    sampled = steps % n_max == 0
    s_steps, s_err = steps[sampled], err2[sampled]
    out = []
    total, count = 0.0, 0
    for t in range(n_max, int(steps.max()) + 1, n_max):
        here = s_steps == t
        total += float(s_err[here].sum())
        count += int(here.sum())
        if count:
            out.append((t, total / count))
    return out


def holdout_mse(log: MetricsLog) -> float:
    """Mean squared error over all holdout records (every agent, every row)."""
    mask = log.phase == "holdout"
    if not mask.any():
        raise ValueError("log has no holdout records")
    return float(np.mean((log.prediction[mask] - log.target[mask]) ** 2))


def holdout_mse_per_agent(log: MetricsLog) -> dict[int, float]:
    mask = log.phase == "holdout"
    out = {}
    for n in np.unique(log.agent[mask]):
        sel = mask & (log.agent == n)
        out[int(n)] = float(np.mean((log.prediction[sel] - log.target[sel]) ** 2))
    return out


def final_weights(log: MetricsLog) -> dict[int, list[float]]:
    """Final normalized weights per agent.

    Taken from the holdout records, which carry the weights after the whole
    stream; falls back to the last training record.
    """
    mask = log.phase == "holdout"
    if not mask.any():
        mask = log.phase == "train"
    out = {}
    for n in np.unique(log.agent[mask]):
        idx = np.flatnonzero(mask & (log.agent == n))
        out[int(n)] = log.weights[idx[-1]].tolist()
    return out
