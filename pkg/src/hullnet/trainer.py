"""A small dense network trained with plain SGD.

Architecture: input -> h1 -> h2 -> 2-way softmax, with the same activation
on both hidden layers. Used to compare how the training loss falls with
the hidden sizes for each activation.
"""
import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.special import log_softmax, softmax

from .activation import RELU, ActivationSpec, derivative, evaluate

SWEEP_COLUMNS = ("h1", "h2", "activation", "final_loss", "accuracy", "runs", "epochs")


@dataclass(frozen=True)
class TrainConfig:
    hidden_sizes: tuple = (36, 6)
    activation: ActivationSpec = RELU
    epochs: int = 20
    batch_size: int = 150
    learning_rate: float = 0.05
    seed: int = 0
    runs: int = 3

    def __post_init__(self):
        if min(self.epochs, self.batch_size, self.runs) < 1:
            raise ValueError("epochs, batch_size and runs must be at least 1")
        if len(self.hidden_sizes) != 2 or min(self.hidden_sizes) < 1:
            raise ValueError(f"need two positive hidden sizes, got {self.hidden_sizes}")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")


@dataclass
class TrainResult:
    final_loss: float
    loss_curve: np.ndarray
    train_accuracy: float
    diverged: bool = False
    run_losses: list = field(default_factory=list)


def init_params(sizes, rng):
    """Glorot-uniform weights and zero biases for consecutive layer sizes."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        r = np.sqrt(6.0 / (fan_in + fan_out))
        params.append((rng.uniform(-r, r, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return params


def forward(params, X, a):
    """Hidden pre-activations, activations and output logits."""
    acts, pres = [X], []
    h = X
    for W, b in params[:-1]:
        z = h @ W + b
        pres.append(z)
        h = evaluate(a, z)
        acts.append(h)
    W, b = params[-1]
    return pres, acts, h @ W + b


def loss_and_grads(params, X, y, a):
    """Mean softmax cross-entropy and its gradient for labels ``y`` in {0, 1}."""
    pres, acts, logits = forward(params, X, a)
    n = len(X)
    logp = log_softmax(logits, axis=1)
    loss = -float(logp[np.arange(n), y].mean())
    g = softmax(logits, axis=1)
    g[np.arange(n), y] -= 1.0
    g /= n
    grads = []
    for k in range(len(params) - 1, -1, -1):
        W, _ = params[k]
        grads.append((acts[k].T @ g, g.sum(axis=0)))
        if k:
            g = (g @ W.T) * derivative(a, pres[k - 1])
    return loss, grads[::-1]


def evaluate_loss(params, X, y, a):
    _, _, logits = forward(params, X, a)
    logp = log_softmax(logits, axis=1)
    loss = -float(logp[np.arange(len(X)), y].mean())
    acc = float(np.mean(np.argmax(logits, axis=1) == y))
    return loss, acc


def _encode(y):
    classes, yi = np.unique(np.asarray(y), return_inverse=True)
    if len(classes) != 2:
        raise ValueError(f"need exactly two labels, got {len(classes)}")
    return yi.ravel()


def _one_run(X, y, cfg, rng):
    h1, h2 = cfg.hidden_sizes
    params = init_params([X.shape[1], h1, h2, 2], rng)
    curve = []
    acc = 0.0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(X))
        for start in range(0, len(X), cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            _, grads = loss_and_grads(params, X[idx], y[idx], cfg.activation)
            params = [(W - cfg.learning_rate * gW, b - cfg.learning_rate * gb)
                      for (W, b), (gW, gb) in zip(params, grads)]
        loss, acc = evaluate_loss(params, X, y, cfg.activation)
        curve.append(loss)
        if not np.isfinite(loss):
            break
    return np.asarray(curve), acc


def train(X, y, cfg):
    """Train ``cfg.runs`` networks from seeds spawned off ``cfg.seed``.

    The loss curve is the per-epoch full-data loss averaged over runs.
    Divergence (a non-finite loss) is reported through ``diverged`` with an
    infinite final loss instead of an exception.
    """
    X = np.asarray(X, dtype=float)
    y = _encode(y)
    seqs = np.random.SeedSequence(cfg.seed).spawn(cfg.runs)
    curves, accs = [], []
    for s in seqs:
        # a diverging run overflows; it is reported below, not warned about
        with np.errstate(over="ignore", invalid="ignore"):
            c, acc = _one_run(X, y, cfg, np.random.default_rng(s))
        curves.append(c)
        accs.append(acc)
    if any(len(c) < cfg.epochs or not np.all(np.isfinite(c)) for c in curves):
        curve = np.full(cfg.epochs, np.inf)
        for e in range(cfg.epochs):
            vals = [c[e] for c in curves if len(c) > e]
            if len(vals) == len(curves):
                curve[e] = np.mean(vals)
        curve[~np.isfinite(curve)] = np.inf
        return TrainResult(float("inf"), curve, float(np.mean(accs)), True,
                           [float(c[-1]) for c in curves])
    curve = np.mean(curves, axis=0)
    return TrainResult(float(curve[-1]), curve, float(np.mean(accs)), False,
                       [float(c[-1]) for c in curves])


def size_sweep(X, y, sizes, activations, cfg, n_jobs=1):
    """Train every (size, activation) cell; returns one dict per cell.

    A cell that raises is recorded with ``error`` set and NaN loss; the
    rest of the sweep still runs.
    """
    if not sizes or not activations:
        raise ValueError("sizes and activations must be nonempty")
    cells = [(tuple(s), a) for s in sizes for a in activations]

    def one(cell):
        (h1, h2), a = cell
        row = {"h1": h1, "h2": h2, "activation": str(a), "runs": cfg.runs,
               "epochs": cfg.epochs}
        try:
            res = train(X, y, replace(cfg, hidden_sizes=(h1, h2), activation=a))
            row.update(final_loss=res.final_loss, accuracy=res.train_accuracy, error="")
        except Exception as exc:  # recorded per cell, see docstring
            row.update(final_loss=float("nan"), accuracy=float("nan"), error=str(exc))
        return row

    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as ex:
            return list(ex.map(one, cells))
    return [one(c) for c in cells]


def write_sweep_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=SWEEP_COLUMNS, extrasaction="ignore")
        w.writeheader()
        for r in rows:
            w.writerow(r)
