import csv

import numpy as np
import pytest

from hullnet.activation import LEAKY_RELU, RELU, SIGMOID, TANH
from hullnet.trainer import (
    SWEEP_COLUMNS,
    TrainConfig,
    evaluate_loss,
    forward,
    init_params,
    loss_and_grads,
    size_sweep,
    train,
    write_sweep_csv,
)
from scipy.special import softmax


def blobs(seed=0, n=100):
    rng = np.random.default_rng(seed)
    X = np.vstack([rng.normal(size=(n, 2)) - 3, rng.normal(size=(n, 2)) + 3])
    return X, np.r_[np.zeros(n, int), np.ones(n, int)]


def noisy_xor(seed=0, reps=50):
    rng = np.random.default_rng(seed)
    C = np.array([[0, 0], [1, 1], [0, 1], [1, 0]], float)
    X = np.repeat(C, reps, axis=0) + rng.normal(scale=0.05, size=(4 * reps, 2))
    return X, np.repeat([0, 0, 1, 1], reps)


def numeric_grads(params, X, y, a, h=1e-6):
    out = []
    for W, b in params:
        gs = []
        for arr in (W, b):
            g = np.zeros_like(arr)
            for idx in np.ndindex(arr.shape):
                old = arr[idx]
                arr[idx] = old + h
                up = loss_and_grads(params, X, y, a)[0]
                arr[idx] = old - h
                down = loss_and_grads(params, X, y, a)[0]
                arr[idx] = old
                g[idx] = (up - down) / (2 * h)
            gs.append(g)
        out.append(tuple(gs))
    return out


@pytest.mark.parametrize("a", [SIGMOID, TANH, RELU, LEAKY_RELU], ids=str)
def test_gradient_check(a):
    rng = np.random.default_rng(0)
    X, y = rng.normal(size=(8, 2)), rng.integers(0, 2, 8)
    params = init_params([2, 3, 2, 2], rng)
    _, grads = loss_and_grads(params, X, y, a)
    for (gW, gb), (nW, nb) in zip(grads, numeric_grads(params, X, y, a)):
        np.testing.assert_allclose(gW, nW, rtol=1e-4, atol=1e-8)
        np.testing.assert_allclose(gb, nb, rtol=1e-4, atol=1e-8)


def test_softmax_outputs_sum_to_one():
    rng = np.random.default_rng(1)
    params = init_params([5, 4, 3, 2], rng)
    _, _, logits = forward(params, rng.normal(size=(20, 5)), TANH)
    np.testing.assert_allclose(softmax(logits, axis=1).sum(axis=1), 1.0, atol=1e-12)


def test_initial_loss_near_ln2():
    # the per-draw loss is right-skewed (a few draws give large logits), so
    # the typical draw is summarised by the median over initialisations
    X, y = blobs()
    X = (X - X.mean(0)) / X.std(0)
    for a in (SIGMOID, TANH, RELU, LEAKY_RELU):
        losses = [evaluate_loss(init_params([2, 36, 6, 2], np.random.default_rng(s)), X, y, a)[0]
                  for s in range(50)]
        assert np.median(losses) == pytest.approx(np.log(2), abs=0.1)


def test_glorot_bounds():
    rng = np.random.default_rng(0)
    for (W, b), (fi, fo) in zip(init_params([10, 6, 3, 2], rng), [(10, 6), (6, 3), (3, 2)]):
        assert np.abs(W).max() <= np.sqrt(6 / (fi + fo))
        assert not b.any()


def test_separable_blobs():
    X, y = blobs()
    res = train(X, y, TrainConfig((4, 2), RELU, epochs=50, batch_size=20, runs=1))
    assert res.train_accuracy == 1.0
    assert res.final_loss < 0.01
    assert len(res.loss_curve) == 50


def test_xor_tanh():
    X, y = noisy_xor()
    res = train(X, y, TrainConfig((4, 2), TANH, epochs=300, batch_size=10,
                                  learning_rate=0.1, runs=1, seed=1))
    assert res.train_accuracy == 1.0


def test_deterministic():
    X, y = blobs(3)
    cfg = TrainConfig((3, 2), SIGMOID, epochs=3, batch_size=16, runs=2, seed=4)
    a, b = train(X, y, cfg), train(X, y, cfg)
    np.testing.assert_array_equal(a.loss_curve, b.loss_curve)


def test_divergence_reported():
    X, y = blobs()
    res = train(X, y, TrainConfig((4, 2), RELU, epochs=5, learning_rate=1e200, runs=2))
    assert res.diverged
    assert res.final_loss == float("inf")
    assert len(res.loss_curve) == 5 and np.all(np.isinf(res.loss_curve))


def test_bad_config_and_labels():
    with pytest.raises(ValueError):
        TrainConfig(epochs=0)
    with pytest.raises(ValueError):
        TrainConfig(hidden_sizes=(3,))
    with pytest.raises(ValueError):
        train(np.zeros((3, 2)), [0, 1, 2], TrainConfig(epochs=1))


def test_sweep_and_csv(tmp_path):
    X, y = blobs(n=40)
    cfg = TrainConfig(epochs=2, runs=1)
    rows = size_sweep(X, y, [(1, 1), (4, 2)], [RELU, SIGMOID], cfg)
    assert [(r["h1"], r["h2"], r["activation"]) for r in rows] == [
        (1, 1, "relu"), (1, 1, "sigmoid"), (4, 2, "relu"), (4, 2, "sigmoid")]
    assert rows == size_sweep(X, y, [(1, 1), (4, 2)], [RELU, SIGMOID], cfg, n_jobs=2)
    path = tmp_path / "sweep.csv"
    write_sweep_csv(rows, path)
    with open(path) as fh:
        got = list(csv.DictReader(fh))
    assert tuple(got[0]) == SWEEP_COLUMNS
    assert len(got) == 4


def test_sweep_cell_failure_does_not_abort():
    X, y = blobs(n=10)
    rows = size_sweep(X, y, [(0, 1), (2, 2)], [RELU], TrainConfig(epochs=1, runs=1))
    assert rows[0]["error"] and np.isnan(rows[0]["final_loss"])
    assert not rows[1]["error"]
