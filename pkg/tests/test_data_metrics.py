import numpy as np
import pytest

from drfgp.data import Dataset, load_dataset, make_se_stream, standardize, write_dataset
from drfgp.exceptions import IngestionError, SchemaError
from drfgp.metrics import (
    final_weights,
    holdout_mse,
    read_metrics_log,
    running_mse,
    write_metrics_log,
)
from drfgp.simnet import ExperimentConfig, MetricsLog, run_experiment


def make_log(rows, num_agents, num_models=1):
    """rows: (phase, step, agent, target, prediction)."""
    phase, step, agent, target, pred = zip(*rows)
    n = len(rows)
    return MetricsLog(
        num_agents=num_agents,
        num_models=num_models,
        phase=np.array(phase),
        step=np.array(step),
        agent=np.array(agent),
        index=np.arange(n),
        target=np.array(target, dtype=float),
        prediction=np.array(pred, dtype=float),
        model_predictions=np.array(pred, dtype=float)[:, None].repeat(num_models, 1),
        weights=np.full((n, num_models), 1.0 / num_models),
    )


def test_load_dataset_basic(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b,target\n1,2,3\n4,5,6\n")
    ds = load_dataset(p)
    assert ds.shape == (2, 2)
    np.testing.assert_array_equal(ds.y, [3, 6])
    assert ds.feature_names == ["a", "b"] and ds.target_name == "target"
    ds2 = load_dataset(p, target_column="a")
    np.testing.assert_array_equal(ds2.y, [1, 4])
    ds3 = load_dataset(p, target_column="0")
    np.testing.assert_array_equal(ds3.y, [1, 4])


def test_load_dataset_no_header_and_delimiter(tmp_path):
    p = tmp_path / "d.tsv"
    p.write_text("1\t2\n3\t4\n5\t6\n")
    ds = load_dataset(p, target_column=0, delimiter="\t", header=False)
    assert ds.shape == (3, 1)
    np.testing.assert_array_equal(ds.y, [1, 3, 5])


def test_load_dataset_errors(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,b\n1,2\n3,x\n")
    with pytest.raises(IngestionError, match="line 3, column 2"):
        load_dataset(p)
    p.write_text("a,b\n1,2\n3,\n")
    with pytest.raises(IngestionError, match="line 3"):
        load_dataset(p)
    p.write_text("a,b\n1,2\n")
    with pytest.raises(SchemaError):
        load_dataset(p, target_column="c")
    with pytest.raises(SchemaError):
        load_dataset(p, target_column=5)
    p.write_text("a,b\n1,2,3\n")
    with pytest.raises(SchemaError):
        load_dataset(p)


def test_standardize_uses_training_prefix_only():
    rng = np.random.default_rng(0)
    X = rng.normal(3.0, 2.0, (50, 3))
    X[40:] += 100.0  # holdout shift must not leak into the statistics
    ds = standardize(Dataset(X, rng.normal(size=50)), train_size=40, targets=True)
    np.testing.assert_allclose(ds.X[:40].mean(0), 0, atol=1e-9)
    np.testing.assert_allclose(ds.X[:40].std(0), 1, atol=1e-9)
    np.testing.assert_allclose(ds.y[:40].mean(), 0, atol=1e-9)
    # recompute oracle
    np.testing.assert_allclose(ds.x_mean, X[:40].mean(0))
    assert ds.X[40:].mean() > 10


def test_dataset_write_read_roundtrip(tmp_path):
    ds = make_se_stream(20, dim=2, seed=0)
    write_dataset(ds, tmp_path / "s.csv")
    back = load_dataset(tmp_path / "s.csv")
    assert np.array_equal(back.X, ds.X) and np.array_equal(back.y, ds.y)


def test_running_mse_examples():
    log = make_log([("train", 1, 0, 0.0, 1.0), ("train", 1, 1, 0.0, 3.0)], 2)
    assert running_mse(log, 1) == [(1, 5.0)]
    exact = make_log([("train", t, n, 1.0, 1.0) for t in range(1, 5) for n in range(2)], 2)
    assert all(v == 0.0 for _, v in running_mse(exact, 2))


def test_running_mse_formula():
    rng = np.random.default_rng(1)
    N, T, n_max = 3, 20, 4
    err = rng.normal(size=(T, N))
    log = make_log([("train", t + 1, n, 0.0, err[t, n]) for t in range(T) for n in range(N)], N)
    series = dict(running_mse(log, n_max))
    for t in range(n_max, T + 1, n_max):
        K = t // n_max
        expect = sum(err[n_max * tau - 1, n] ** 2 for tau in range(1, K + 1)
                     for n in range(N)) / (N * K)
        assert series[t] == pytest.approx(expect, rel=1e-12)


def test_running_mse_ignores_unsampled_steps():
    rows = [("train", t, 0, 0.0, 0.5) for t in range(1, 9)]
    log = make_log(rows, 1)
    log2 = make_log(rows, 1)
    log2.prediction[2] = 99.0  # step 3 is not a multiple of n_max = 2
    assert running_mse(log, 2) == running_mse(log2, 2)
    assert running_mse(log, 10) == []


def test_holdout_mse():
    log = make_log([("holdout", 0, 0, 0.0, 2.0), ("holdout", 1, 0, 1.0, 1.0)], 1)
    assert holdout_mse(log) == 2.0
    zero = make_log([("holdout", k, 0, 1.0, 1.0) for k in range(3)], 1)
    assert holdout_mse(zero) == 0.0
    rows = [("holdout", k, n, float(k), k + 0.1 * n) for k in range(4) for n in range(2)]
    assert holdout_mse(make_log(rows, 2)) == pytest.approx(holdout_mse(make_log(rows[::-1], 2)))


def test_metrics_do_not_mutate_log_and_roundtrip(tmp_path):
    ds = make_se_stream(50, dim=1, seed=2)
    cfg = ExperimentConfig(num_agents=2, graph="complete", lengthscales=[1.0, 3.0],
                           num_features=4, holdout_size=10)
    log = run_experiment(cfg, ds.X, ds.y)
    before = log.prediction.copy()
    r1, h1 = running_mse(log, 3), holdout_mse(log)
    assert np.array_equal(log.prediction, before)
    write_metrics_log(log, tmp_path / "m.csv")
    back = read_metrics_log(tmp_path / "m.csv")
    assert running_mse(back, 3) == r1 and holdout_mse(back) == h1
    assert final_weights(back) == final_weights(log)
    (tmp_path / "bad.csv").write_text("hello\n")
    with pytest.raises(IngestionError):
        read_metrics_log(tmp_path / "bad.csv")
