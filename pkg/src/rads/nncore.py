"""Minimal feedforward network engine: ReLU MLP with inverted dropout,
stable softmax, weighted cross-entropy, manual backpropagation, and Adam.

Shared by the synthetic-experiment classifier and the Q-network of the
RL sampler. All math is float64 numpy; nets are small by design.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import LabelError, NumericError, ParameterError, ShapeError

Mode = str  # "deterministic" | "dropout"


@dataclass
class Mlp:
    """Fully connected net. ``weights[i]`` has shape (layer_dims[i], layer_dims[i+1]);
    hidden layers are ReLU with optional inverted dropout, the output layer is linear."""

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    dropout_rate: float = 0.0
    activation: str = "relu"

    def __post_init__(self):
        if any(d <= 0 for d in self.layer_dims):
            raise ParameterError(f"layer_dims must be positive, got {self.layer_dims}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ParameterError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")
        if self.activation != "relu":
            raise ParameterError(f"unsupported activation {self.activation!r}")
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_dims[i], self.layer_dims[i + 1])
            if w.shape != want or b.shape != (want[1],):
                raise ShapeError(f"layer {i}: weight shape {w.shape} does not chain with dims {want}")


@dataclass
class OptimizerState:
    """Adam accumulators. ``m``/``v`` mirror the net's [w0, b0, w1, b1, ...] order."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)
    step: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be positive")


def init_mlp(layer_dims: list[int], dropout_rate: float = 0.0,
             rng: np.random.Generator | None = None) -> Mlp:
    """He-uniform weights, zero biases."""
    rng = rng if rng is not None else np.random.default_rng(0)
    weights, biases = [], []
    for fan_in, fan_out in zip(layer_dims[:-1], layer_dims[1:]):
        limit = np.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return Mlp(list(layer_dims), weights, biases, dropout_rate)


def init_adam(net: Mlp, learning_rate: float) -> OptimizerState:
    opt = OptimizerState(learning_rate=learning_rate)
    for w, b in zip(net.weights, net.biases):
        opt.m += [np.zeros_like(w), np.zeros_like(b)]
        opt.v += [np.zeros_like(w), np.zeros_like(b)]
    return opt


def clone_mlp(net: Mlp) -> Mlp:
    return Mlp(list(net.layer_dims), [w.copy() for w in net.weights],
               [b.copy() for b in net.biases], net.dropout_rate, net.activation)


def softmax(logits: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = logits - np.max(logits, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


@dataclass
class ForwardCache:
    """Intermediate state of one (possibly batched) forward pass."""

    layer_inputs: list[np.ndarray]   # input to each linear layer
    relu_alive: list[np.ndarray]     # pre-activation > 0, per hidden layer
    drop_scale: list[np.ndarray | float]  # inverted-dropout multiplier, per hidden layer


def _forward_batch(net: Mlp, inputs: np.ndarray, mode: Mode = "deterministic",
                   rng: np.random.Generator | None = None) -> tuple[np.ndarray, ForwardCache]:
    if mode not in ("deterministic", "dropout"):
        raise ParameterError(f"unknown mode {mode!r}")
    if mode == "dropout" and net.dropout_rate > 0.0 and rng is None:
        raise ParameterError("dropout mode requires an rng")
    if inputs.ndim != 2 or inputs.shape[1] != net.layer_dims[0]:
        raise ShapeError(f"expected inputs of width {net.layer_dims[0]}, got shape {inputs.shape}")

    cache = ForwardCache([], [], [])
    h = inputs
    n_layers = len(net.weights)
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        cache.layer_inputs.append(h)
        z = h @ w + b
        if i == n_layers - 1:
            return z, cache
        alive = z > 0.0
        h = np.where(alive, z, 0.0)
        cache.relu_alive.append(alive)
        if mode == "dropout" and net.dropout_rate > 0.0:
            keep = rng.random(h.shape) >= net.dropout_rate
            scale = keep / (1.0 - net.dropout_rate)
            h = h * scale
            cache.drop_scale.append(scale)
        else:
            cache.drop_scale.append(1.0)
    raise AssertionError("unreachable")


def forward(net: Mlp, input_vec: np.ndarray, mode: Mode = "deterministic",
            rng: np.random.Generator | None = None) -> tuple[np.ndarray, ForwardCache]:
    """Single-sample forward pass; returns (logits, cache)."""
    x = np.asarray(input_vec, dtype=float)
    if x.ndim != 1:
        raise ShapeError(f"expected a 1-D input vector, got shape {x.shape}")
    logits, cache = _forward_batch(net, x[None, :], mode, rng)
    return logits[0], cache


def backward(net: Mlp, cache: ForwardCache, dlogits: np.ndarray) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Backpropagate a gradient w.r.t. the logits; returns (dW list, db list)."""
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.biases)
    delta = dlogits
    for i in range(len(net.weights) - 1, -1, -1):
        grads_w[i] = cache.layer_inputs[i].T @ delta
        grads_b[i] = delta.sum(axis=0)
        if i > 0:
            delta = delta @ net.weights[i].T
            delta = delta * cache.drop_scale[i - 1]
            delta = np.where(cache.relu_alive[i - 1], delta, 0.0)
    return grads_w, grads_b


def adam_step(net: Mlp, opt: OptimizerState,
              grads_w: list[np.ndarray], grads_b: list[np.ndarray]) -> None:
    """One in-place Adam update over all parameters."""
    opt.step += 1
    b1, b2 = opt.beta1, opt.beta2
    bc1 = 1.0 - b1 ** opt.step
    bc2 = 1.0 - b2 ** opt.step
    params = []
    grads = []
    for w, b, gw, gb in zip(net.weights, net.biases, grads_w, grads_b):
        params += [w, b]
        grads += [gw, gb]
    for p, g, m, v in zip(params, grads, opt.m, opt.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p -= opt.learning_rate * (m / bc1) / (np.sqrt(v / bc2) + opt.eps)


def train_step(net: Mlp, opt: OptimizerState, batch: tuple[np.ndarray, np.ndarray],
               class_weights: np.ndarray | None = None,
               rng: np.random.Generator | None = None) -> float:
    """One weighted cross-entropy step. Returns the pre-update mean loss.

    Dropout is applied when ``rng`` is given, matching how the net will later
    be scored; pass ``rng=None`` for a deterministic step.
    """
    inputs = np.asarray(batch[0], dtype=float)
    labels = np.asarray(batch[1])
    if inputs.ndim != 2 or len(inputs) == 0:
        raise ParameterError("batch must be a non-empty 2-D array of inputs")
    if len(labels) != len(inputs):
        raise ShapeError("inputs and labels length mismatch")
    n_classes = net.layer_dims[-1]
    if labels.min() < 0 or labels.max() >= n_classes:
        raise LabelError(f"labels must lie in [0, {n_classes})")

    mode = "dropout" if rng is not None else "deterministic"
    logits, cache = _forward_batch(net, inputs, mode, rng)
    probs = softmax(logits)
    n = len(inputs)
    picked = probs[np.arange(n), labels]
    per_sample = -np.log(np.clip(picked, 1e-12, None))
    if class_weights is not None:
        class_weights = np.asarray(class_weights, dtype=float)
        if class_weights.shape != (n_classes,) or np.any(class_weights <= 0):
            raise ParameterError("class_weights must hold one positive weight per class")
        sample_w = class_weights[labels]
    else:
        sample_w = np.ones(n)
    loss = float(np.mean(sample_w * per_sample))
    if not np.isfinite(loss):
        raise NumericError("non-finite training loss")

    dlogits = probs.copy()
    dlogits[np.arange(n), labels] -= 1.0
    dlogits *= (sample_w / n)[:, None]
    grads_w, grads_b = backward(net, cache, dlogits)
    adam_step(net, opt, grads_w, grads_b)
    return loss


def mc_passes(net: Mlp, input_vec: np.ndarray, n_passes: int,
              rng: np.random.Generator) -> np.ndarray:
    """Stochastic forward passes with dropout active; returns an
    (n_passes, n_classes) matrix of softmax probabilities."""
    if n_passes < 1:
        raise ParameterError(f"n_passes must be >= 1, got {n_passes}")
    x = np.asarray(input_vec, dtype=float)
    rows = np.empty((n_passes, net.layer_dims[-1]))
    for k in range(n_passes):
        logits, _ = forward(net, x, "dropout", rng)
        rows[k] = softmax(logits)
    return rows
