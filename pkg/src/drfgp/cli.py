"""Command-line entry point: ``drfgp run | metrics | inspect``.

Exit codes: 0 success, 2 usage/config error, 3 data error, 4 numerical or
graph error, 1 anything else raised by the package.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Optional

import numpy as np

from . import metrics
from .data import Dataset, load_dataset, make_se_stream, standardize
from .exceptions import DRFGPError
from .simnet import ExperimentConfig, load_snapshot, run_experiment, summarize_snapshot

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger("drfgp")

EXIT_CODES = {
    "config": 2,
    "invalid-spec": 2,
    "schema": 3,
    "ingestion": 3,
    "snapshot": 3,
    "numerical": 4,
    "invalid-graph": 4,
    "graph-generation": 4,
    "degenerate-weights": 4,
    "shape": 4,
}


def load_config(path: Optional[str]) -> dict:
    """Read a flat TOML config; keys must be :class:`ExperimentConfig` fields."""
    if path is None:
        return {}
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def prepare_dataset(config: ExperimentConfig, ds: Dataset) -> Dataset:
    """Optional shuffle, then standardization fitted on the training prefix only."""
    config.validate(dataset_size=len(ds))
    if config.shuffle_seed is not None:
        perm = np.random.default_rng(config.shuffle_seed).permutation(len(ds))
        ds = Dataset(ds.X[perm], ds.y[perm], ds.feature_names, ds.target_name)
    if config.standardize or config.standardize_targets:
        n_train = len(ds) - config.holdout_size
        ds = standardize(
            ds, n_train, inputs=config.standardize, targets=config.standardize_targets
        )
    return ds


def _synthetic(config: ExperimentConfig) -> Dataset:
    return make_se_stream(2000 + config.holdout_size, dim=1, lengthscale=1.0, seed=config.seed)


_OVERRIDES = [
    # flag, config key, type
    ("--num-agents", "num_agents", int),
    ("--edge-probability", "edge_probability", float),
    ("--graph", "graph", str),
    ("--rounds", "consensus_rounds", int),
    ("--weight-scheme", "weight_scheme", str),
    ("--num-features", "num_features", int),
    ("--prior-var", "prior_var", float),
    ("--obs-var", "obs_var", float),
    ("--bma-mode", "bma_mode", str),
    ("--holdout-size", "holdout_size", int),
    ("--shuffle-seed", "shuffle_seed", int),
    ("--snapshot-every", "snapshot_every", int),
    ("--target-column", "target_column", str),
    ("--delimiter", "delimiter", str),
]


def _lengthscales(text: str) -> list:
    """``0.1,1,10`` -> three isotropic models; ``1:2;3:4`` -> two ARD models."""
    models = []
    for part in text.replace(" ", "").split(";" if ";" in text else ","):
        vals = [float(v) for v in part.split(":")]
        models.append(vals[0] if len(vals) == 1 else vals)
    return models


def cmd_run(args) -> int:
    raw = load_config(args.config)
    for _, key, _ in _OVERRIDES:
        val = getattr(args, key)
        if val is not None:
            raw[key] = val
    if args.seed is not None:
        raw["seed"] = args.seed
    if args.dataset is not None:
        raw["dataset"] = args.dataset
    if args.lengthscales is not None:
        raw["lengthscales"] = _lengthscales(args.lengthscales)
    if args.no_header:
        raw["header"] = False
    if args.no_standardize:
        raw["standardize"] = False
        raw["standardize_targets"] = False
    config = ExperimentConfig.from_dict(raw)
    if config.dataset is None:
        raise DRFGPError("no dataset given (use --dataset PATH or --dataset synthetic)")

    if config.dataset == "synthetic":
        ds = _synthetic(config)
    else:
        ds = load_dataset(config.dataset, config.target_column, config.delimiter, config.header)
    logger.info("loaded %s: T=%d, D=%d", config.dataset, *ds.shape)
    ds = prepare_dataset(config, ds)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    snap_dir = out / "snapshots" if config.snapshot_every else None
    log = run_experiment(config, ds.X, ds.y, snapshot_dir=snap_dir)
    metrics.write_metrics_log(log, out / "metrics.csv")

    summary = {
        "config": config.to_dict(),
        "config_hash": config.config_hash(),
        "dataset_shape": list(ds.shape),
        "num_steps": int(log.step[log.phase == "train"].max(initial=0)),
        "final_weights": {str(k): v for k, v in metrics.final_weights(log).items()},
    }
    if config.holdout_size:
        summary["holdout_mse"] = metrics.holdout_mse(log)
        summary["holdout_mse_per_agent"] = {
            str(k): v for k, v in metrics.holdout_mse_per_agent(log).items()
        }
    if args.n_max:
        _write_series(metrics.running_mse(log, args.n_max), out / "running_mse.csv")
    with open(out / "summary.json", "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    if "holdout_mse" in summary:
        print(f"holdout MSE: {summary['holdout_mse']:.6g}")
    print(f"wrote {out / 'metrics.csv'} and {out / 'summary.json'}")
    return 0


def _write_series(series, path) -> None:
    with open(path, "w") as fh:
        fh.write("t,mse\n")
        for t, v in series:
            fh.write(f"{t},{v!r}\n")


def cmd_metrics(args) -> int:
    log = metrics.read_metrics_log(args.log)
    if args.n_max:
        series = metrics.running_mse(log, args.n_max)
        if args.out:
            _write_series(series, args.out)
        else:
            sys.stdout.write("t,mse\n")
            for t, v in series:
                sys.stdout.write(f"{t},{v!r}\n")
    if (log.phase == "holdout").any():
        print(f"holdout MSE: {metrics.holdout_mse(log)!r}")
    return 0


def cmd_inspect(args) -> int:
    for path in args.snapshots:
        summary = summarize_snapshot(load_snapshot(path))
        summary["file"] = str(path)
        print(json.dumps(summary, indent=2))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="drfgp", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a streaming experiment")
    r.add_argument("--config", help="TOML file with ExperimentConfig keys")
    r.add_argument("--dataset", help="delimited text file, or 'synthetic'")
    r.add_argument("--out", default="drfgp-out", help="output directory (default: %(default)s)")
    r.add_argument("--seed", type=int, help="master seed (default: config value, else 0)")
    r.add_argument("--lengthscales", help="e.g. '0.1,1,10' or '1:2;3:4' for ARD models")
    r.add_argument("--n-max", type=int, help="also write running MSE sampled every N_MAX steps")
    r.add_argument("--no-header", action="store_true")
    r.add_argument("--no-standardize", action="store_true")
    for flag, key, typ in _OVERRIDES:
        r.add_argument(flag, dest=key, type=typ)
    r.set_defaults(func=cmd_run)

    m = sub.add_parser("metrics", help="recompute metrics from a metrics log")
    m.add_argument("log")
    m.add_argument("--n-max", type=int, help="running MSE sampling interval")
    m.add_argument("--out", help="write the running MSE series here instead of stdout")
    m.set_defaults(func=cmd_metrics)

    i = sub.add_parser("inspect", help="summarize snapshot files")
    i.add_argument("snapshots", nargs="+")
    i.set_defaults(func=cmd_inspect)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except DRFGPError as exc:
        print(f"drfgp: {exc.category} error: {exc}", file=sys.stderr)
        return EXIT_CODES.get(exc.category, 1)
    except (OSError, tomllib.TOMLDecodeError) as exc:
        print(f"drfgp: io error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
