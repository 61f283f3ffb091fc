"""Feed-forward binary classifier trained with mini-batch Adam.

The network is a plain multi-layer perceptron: ReLU on hidden layers, a
sigmoid on the single output unit, and mean binary cross-entropy as the
training loss.  Everything is implemented directly on numpy arrays so that
gradients are exact, runs are deterministic under a seed, and a fitted model
can be updated incrementally from its current weights (the basis of the
lifelong-learning setups in :mod:`llstream.runner`).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.special import expit

from .util import rng_from

# Probabilities are clamped to this band before the cross-entropy log terms,
# so the loss stays finite for saturated outputs.
PROB_FLOOR = 1e-7

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

MODEL_FORMAT = "llstream-mlp/1"


@dataclass
class MlpModel:
    """Weights of a fully connected network.

    ``weights[i]`` has shape ``(layer_sizes[i], layer_sizes[i+1])`` and
    ``biases[i]`` has shape ``(layer_sizes[i+1],)``.  ``version`` counts how
    many completed training passes produced this parameter set.
    """

    layer_sizes: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    version: int = 0

    @property
    def input_dim(self) -> int:
        return self.layer_sizes[0]

    def copy(self) -> "MlpModel":
        return MlpModel(
            layer_sizes=list(self.layer_sizes),
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            version=self.version,
        )

    def params_equal(self, other: "MlpModel") -> bool:
        return (
            self.layer_sizes == other.layer_sizes
            and all(np.array_equal(a, b) for a, b in zip(self.weights, other.weights))
            and all(np.array_equal(a, b) for a, b in zip(self.biases, other.biases))
        )


@dataclass
class OptState:
    """Adam accumulators, one pair of moment arrays per parameter array."""

    m_weights: list[np.ndarray]
    v_weights: list[np.ndarray]
    m_biases: list[np.ndarray]
    v_biases: list[np.ndarray]
    step: int = 0
    lr: float = 1e-3


@dataclass
class Grads:
    weights: list[np.ndarray]
    biases: list[np.ndarray]


@dataclass
class FitReport:
    """Per-epoch training trace plus the selected checkpoint."""

    train_loss: list[float] = field(default_factory=list)
    valid_f1: list[float] = field(default_factory=list)
    valid_loss: list[float] = field(default_factory=list)
    best_epoch: int | None = None
    version: int = 0
    degenerate_validation: bool = False


def init_mlp(layer_sizes: Sequence[int], seed: int) -> MlpModel:
    """Create a model with uniform ``+/- sqrt(6 / (fan_in + fan_out))`` weights.

    The output layer must have exactly one unit; biases start at zero.
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ValueError("layer_sizes needs an input and an output entry")
    if sizes[-1] != 1:
        raise ValueError(f"output layer must have width 1, got {sizes[-1]}")
    if any(s < 1 for s in sizes):
        raise ValueError(f"layer sizes must be positive: {sizes}")

    rng = rng_from(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpModel(layer_sizes=sizes, weights=weights, biases=biases, version=0)


def _check_batch(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2:
        raise ValueError(f"batch must be 2-D, got shape {x.shape}")
    if x.shape[1] != model.input_dim:
        raise ValueError(
            f"batch has {x.shape[1]} features, model expects {model.input_dim}"
        )
    return x


def _forward_trace(model: MlpModel, x: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Pre-activations and activations per layer; activations[0] is the input."""
    pre: list[np.ndarray] = []
    acts: list[np.ndarray] = [x]
    a = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        pre.append(z)
        a = expit(z) if i == last else np.maximum(z, 0.0)
        acts.append(a)
    return pre, acts


def forward(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Probability of the positive class for each row, strictly inside (0, 1)."""
    x = _check_batch(model, batch)
    _, acts = _forward_trace(model, x)
    return np.clip(acts[-1][:, 0], PROB_FLOOR, 1.0 - PROB_FLOOR)


def predict_labels(model: MlpModel, points: np.ndarray, threshold: float = 0.5) -> np.ndarray:
    """Hard labels; a probability equal to the threshold counts as positive."""
    if not 0.0 < threshold < 1.0:
        raise ValueError(f"threshold must lie in (0, 1), got {threshold}")
    return (forward(model, points) >= threshold).astype(int)


def _backprop(
    model: MlpModel,
    x: np.ndarray,
    y: np.ndarray,
    *,
    want_input_grad: bool = False,
) -> tuple[float, Grads, np.ndarray | None]:
    """Mean BCE loss and exact gradients for the clamped network.

    Where the output probability is clamped the implemented loss is locally
    flat, so those rows contribute zero gradient; everywhere else the usual
    ``(p - y) / n`` output delta applies.
    """
    n = x.shape[0]
    pre, acts = _forward_trace(model, x)
    raw = acts[-1][:, 0]
    inside = (raw >= PROB_FLOOR) & (raw <= 1.0 - PROB_FLOOR)
    p = np.clip(raw, PROB_FLOOR, 1.0 - PROB_FLOOR)
    loss = float(-np.mean(y * np.log(p) + (1.0 - y) * np.log(1.0 - p)))

    delta = ((p - y) * inside / n)[:, None]
    grads_w: list[np.ndarray] = [np.empty(0)] * len(model.weights)
    grads_b: list[np.ndarray] = [np.empty(0)] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grads_w[i] = acts[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ model.weights[i].T) * (pre[i - 1] > 0)

    input_grad = None
    if want_input_grad:
        d = (raw * (1.0 - raw) * inside / n)[:, None]
        for i in range(len(model.weights) - 1, 0, -1):
            d = (d @ model.weights[i].T) * (pre[i - 1] > 0)
        input_grad = d @ model.weights[0].T

    return loss, Grads(weights=grads_w, biases=grads_b), input_grad


def output_input_grad(model: MlpModel, batch: np.ndarray) -> np.ndarray:
    """Gradient of the mean output probability w.r.t. each input entry."""
    x = _check_batch(model, batch)
    n = x.shape[0]
    pre, acts = _forward_trace(model, x)
    raw = acts[-1][:, 0]
    inside = (raw >= PROB_FLOOR) & (raw <= 1.0 - PROB_FLOOR)
    d = (raw * (1.0 - raw) * inside / n)[:, None]
    for i in range(len(model.weights) - 1, 0, -1):
        d = (d @ model.weights[i].T) * (pre[i - 1] > 0)
    return d @ model.weights[0].T


def loss_and_grad(
    model: MlpModel, batch: np.ndarray, labels: np.ndarray
) -> tuple[float, Grads, np.ndarray]:
    """Mean BCE loss, parameter gradients, and the input-attribution matrix.

    The third result is the gradient of the mean output probability with
    respect to the input features (used for feature-importance reports).
    """
    x = _check_batch(model, batch)
    if x.shape[0] == 0:
        raise ValueError("batch is empty")
    if np.isnan(x).any():
        raise ValueError("batch contains NaN")
    y = np.asarray(labels, dtype=float).reshape(-1)
    if y.shape[0] != x.shape[0]:
        raise ValueError("labels do not match batch length")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ValueError("labels must be 0 or 1")
    loss, grads, input_grad = _backprop(model, x, y, want_input_grad=True)
    assert input_grad is not None
    return loss, grads, input_grad


def init_opt_state(model: MlpModel, lr: float) -> OptState:
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")
    return OptState(
        m_weights=[np.zeros_like(w) for w in model.weights],
        v_weights=[np.zeros_like(w) for w in model.weights],
        m_biases=[np.zeros_like(b) for b in model.biases],
        v_biases=[np.zeros_like(b) for b in model.biases],
        step=0,
        lr=lr,
    )


def adam_step(model: MlpModel, grads: Grads, state: OptState) -> tuple[MlpModel, OptState]:
    """One bias-corrected Adam update; inputs are left untouched."""
    for g, w in zip(grads.weights, model.weights):
        if g.shape != w.shape:
            raise ValueError(f"gradient shape {g.shape} does not match weights {w.shape}")
    t = state.step + 1
    c1 = 1.0 - ADAM_BETA1**t
    c2 = 1.0 - ADAM_BETA2**t

    new_model = model.copy()
    new_state = OptState(
        m_weights=[], v_weights=[], m_biases=[], v_biases=[], step=t, lr=state.lr
    )
    for kind in ("weights", "biases"):
        params = getattr(new_model, kind)
        gs = getattr(grads, kind)
        ms = getattr(state, f"m_{kind}")
        vs = getattr(state, f"v_{kind}")
        for i, g in enumerate(gs):
            m = ADAM_BETA1 * ms[i] + (1.0 - ADAM_BETA1) * g
            v = ADAM_BETA2 * vs[i] + (1.0 - ADAM_BETA2) * g * g
            params[i] -= state.lr * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
            getattr(new_state, f"m_{kind}").append(m)
            getattr(new_state, f"v_{kind}").append(v)
    return new_model, new_state


def _f1_positive(pred: np.ndarray, y: np.ndarray) -> float:
    tp = float(np.sum((pred == 1) & (y == 1)))
    fp = float(np.sum((pred == 1) & (y == 0)))
    fn = float(np.sum((pred == 0) & (y == 1)))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom > 0 else 0.0


def fit(
    model: MlpModel,
    train: tuple[np.ndarray, np.ndarray],
    valid: tuple[np.ndarray, np.ndarray],
    hyper,
    *,
    shuffle_seed: int | None = None,
) -> tuple[MlpModel, FitReport]:
    """Mini-batch Adam training with best-epoch checkpointing.

    Each epoch shuffles the training set, walks it in mini-batches (the last
    partial batch included), and applies one Adam update per batch.  After
    every epoch the model is scored on the validation set; the returned model
    is the checkpoint with the highest validation F1 (earliest epoch on ties).
    A single-class validation set is flagged degenerate and the checkpoint
    falls back to minimal validation loss.  The input model is not mutated;
    the returned model carries ``version + 1``.  With ``epochs=0`` the input
    model is returned unchanged.
    """
    x_train = _check_batch(model, train[0])
    y_train = np.asarray(train[1], dtype=float).reshape(-1)
    x_valid = _check_batch(model, valid[0])
    y_valid = np.asarray(valid[1], dtype=float).reshape(-1)
    if x_train.shape[0] == 0 or x_valid.shape[0] == 0:
        raise ValueError("training and validation sets must be nonempty")

    epochs = int(hyper.epochs)
    if epochs == 0:
        return model, FitReport(version=model.version)

    degenerate = len(np.unique(y_valid)) < 2
    report = FitReport(version=model.version + 1, degenerate_validation=degenerate)

    if shuffle_seed is None:
        shuffle_seed = hyper.seed
    rng = rng_from(shuffle_seed, model.version)

    current = model.copy()
    state = init_opt_state(current, hyper.lr)
    batch = int(hyper.minibatch)
    n = x_train.shape[0]

    best_params: MlpModel | None = None
    best_f1 = -1.0
    best_loss = math.inf
    best_epoch = 0

    for epoch in range(epochs):
        order = rng.permutation(n)
        loss_sum = 0.0
        for start in range(0, n, batch):
            idx = order[start : start + batch]
            loss, grads, _ = _backprop(current, x_train[idx], y_train[idx])
            loss_sum += loss * len(idx)
            current, state = adam_step(current, grads, state)
        report.train_loss.append(loss_sum / n)

        v_loss, _, _ = _backprop(current, x_valid, y_valid)
        v_pred = (forward(current, x_valid) >= hyper.threshold).astype(int)
        v_f1 = _f1_positive(v_pred, y_valid)
        report.valid_loss.append(v_loss)
        report.valid_f1.append(v_f1)

        better = v_loss < best_loss if degenerate else v_f1 > best_f1
        if better or best_params is None:
            best_params = current.copy()
            best_f1 = v_f1
            best_loss = v_loss
            best_epoch = epoch

    assert best_params is not None
    best_params.version = model.version + 1
    report.best_epoch = best_epoch
    return best_params, report


def save_model(model: MlpModel, path: str | Path) -> None:
    """Write the model as JSON; floats round-trip exactly."""
    payload = {
        "format": MODEL_FORMAT,
        "layer_sizes": model.layer_sizes,
        "version": model.version,
        "weights": [w.tolist() for w in model.weights],
        "biases": [b.tolist() for b in model.biases],
    }
    Path(path).write_text(json.dumps(payload))


def load_model(path: str | Path) -> MlpModel:
    payload = json.loads(Path(path).read_text())
    if payload.get("format") != MODEL_FORMAT:
        raise ValueError(f"unrecognized model file format: {payload.get('format')!r}")
    return MlpModel(
        layer_sizes=[int(s) for s in payload["layer_sizes"]],
        weights=[np.array(w, dtype=float) for w in payload["weights"]],
        biases=[np.array(b, dtype=float) for b in payload["biases"]],
        version=int(payload["version"]),
    )
