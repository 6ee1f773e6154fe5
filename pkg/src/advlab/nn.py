"""Dense feed-forward classifiers with analytic input gradients.

The network is deliberately small: ordered dense layers with relu or identity
activations and a softmax cross-entropy head. Besides training and evaluation
it exposes the gradient of the loss with respect to the *input*, which is the
quantity every gradient-based evasion attack consumes, and the per-class logit
input-gradients used by boundary-seeking attacks.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .errors import FormatError, InputError, LabelError, ParameterError, ShapeError
from .metrics import EvalReport, report_from_predictions

ACTIVATIONS = ("relu", "identity")

MODEL_FORMAT = "advlab-model"
MODEL_VERSION = 1


@dataclass
class DenseLayer:
    """One dense layer: ``weights`` is (out, in), ``biases`` is (out,)."""

    weights: np.ndarray
    biases: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.biases = np.asarray(self.biases, dtype=np.float64)
        if self.weights.ndim != 2:
            raise ShapeError(f"weights must be 2-D, got {self.weights.ndim}-D")
        if self.biases.shape != (self.weights.shape[0],):
            raise ShapeError(
                f"bias length {self.biases.shape} does not match weight rows {self.weights.shape[0]}"
            )
        if self.activation not in ACTIVATIONS:
            raise ParameterError(f"unknown activation {self.activation!r}")
        if not (np.isfinite(self.weights).all() and np.isfinite(self.biases).all()):
            raise ParameterError("layer parameters must be finite")

    @property
    def out_dim(self) -> int:
        return self.weights.shape[0]

    @property
    def in_dim(self) -> int:
        return self.weights.shape[1]


@dataclass
class Network:
    """Ordered dense layers; the last layer's output feeds a softmax head."""

    layers: list[DenseLayer]
    class_count: int

    def __post_init__(self):
        if not self.layers:
            raise ShapeError("network needs at least one layer")
        for prev, nxt in zip(self.layers, self.layers[1:]):
            if nxt.in_dim != prev.out_dim:
                raise ShapeError(
                    f"layer dimensions do not chain: {prev.out_dim} -> {nxt.in_dim}"
                )
        if self.layers[-1].out_dim != self.class_count:
            raise ShapeError(
                f"final layer emits {self.layers[-1].out_dim} values, expected {self.class_count}"
            )

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim


@dataclass
class LabeledBatch:
    """Inputs (n, d) with entries in [0, 1] and integer class labels (n,)."""

    inputs: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.inputs = np.asarray(self.inputs, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.inputs.ndim != 2 or self.labels.ndim != 1:
            raise ShapeError("inputs must be (n, d) and labels (n,)")
        if self.inputs.shape[0] != self.labels.shape[0]:
            raise ShapeError("inputs and labels disagree on sample count")
        if self.inputs.shape[0] < 1:
            raise InputError("batch must contain at least one sample")

    def __len__(self) -> int:
        return self.inputs.shape[0]


@dataclass
class TrainConfig:
    learning_rate: float = 0.1
    epochs: int = 10
    batch_size: int = 128
    rng_seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ParameterError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ParameterError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ParameterError("epochs must be >= 0")


def build_network(layer_dims: list[int], rng_seed: int = 0, hidden_activation: str = "relu") -> Network:
    """Create a network with uniform +-sqrt(6/(fan_in+fan_out)) weights.

    ``layer_dims`` lists sizes input-first, e.g. [784, 128, 10]. Hidden layers
    use ``hidden_activation``; the final layer is always identity (its output
    are the logits fed to softmax).
    """
    if len(layer_dims) < 2:
        raise ShapeError("need at least input and output dims")
    rng = np.random.default_rng(rng_seed)
    layers = []
    for i, (fan_in, fan_out) in enumerate(zip(layer_dims, layer_dims[1:])):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        w = rng.uniform(-limit, limit, size=(fan_out, fan_in))
        b = np.zeros(fan_out)
        act = "identity" if i == len(layer_dims) - 2 else hidden_activation
        layers.append(DenseLayer(w, b, act))
    return Network(layers, class_count=layer_dims[-1])


def _as_batch_2d(inputs: np.ndarray) -> np.ndarray:
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim == 1:
        x = x[None, :]
    if x.ndim != 2:
        raise ShapeError(f"inputs must be 1-D or 2-D, got {x.ndim}-D")
    return x


def _forward_cached(net: Network, x: np.ndarray):
    """Forward pass keeping pre- and post-activation values of every layer."""
    if x.shape[1] != net.input_dim:
        raise ShapeError(f"input width {x.shape[1]} does not match first layer {net.input_dim}")
    pre, post = [], [x]
    a = x
    for layer in net.layers:
        z = a @ layer.weights.T + layer.biases
        a = np.maximum(z, 0.0) if layer.activation == "relu" else z
        pre.append(z)
        post.append(a)
    return pre, post


def _softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def _log_softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=1, keepdims=True))


def logits(net: Network, inputs: np.ndarray) -> np.ndarray:
    """Pre-softmax outputs, shape (n, class_count)."""
    x = _as_batch_2d(inputs)
    _, post = _forward_cached(net, x)
    return post[-1]


def forward(net: Network, inputs: np.ndarray) -> np.ndarray:
    """Class probabilities, shape (n, class_count); each row sums to 1."""
    return _softmax(logits(net, inputs))


def _check_labels(net: Network, y: np.ndarray) -> np.ndarray:
    y = np.atleast_1d(np.asarray(y, dtype=np.int64))
    if y.size and (y.min() < 0 or y.max() >= net.class_count):
        raise LabelError(f"class index outside [0, {net.class_count})")
    return y


def _backprop_to_input(net: Network, pre: list[np.ndarray], delta: np.ndarray) -> np.ndarray:
    """Propagate an output-side gradient ``delta`` (n, C) back to the input."""
    for layer, z in zip(reversed(net.layers), reversed(pre)):
        if layer.activation == "relu":
            delta = delta * (z > 0)
        delta = delta @ layer.weights
    return delta


def batch_losses_and_input_gradients(
    net: Network, inputs: np.ndarray, y: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Per-sample cross-entropy losses (n,) and input gradients (n, d)."""
    x = _as_batch_2d(inputs)
    y = _check_labels(net, y)
    if y.shape[0] != x.shape[0]:
        raise ShapeError("inputs and labels disagree on sample count")
    pre, _ = _forward_cached(net, x)
    logp = _log_softmax(pre[-1])
    losses = -logp[np.arange(x.shape[0]), y]
    delta = np.exp(logp)
    delta[np.arange(x.shape[0]), y] -= 1.0
    # delta on the last layer already includes the softmax jacobian; the last
    # layer is identity-activated so _backprop_to_input applies no relu mask.
    grads = _backprop_to_input(net, pre, delta)
    return losses, grads


def loss_and_input_gradient(net: Network, x: np.ndarray, y: int) -> tuple[float, np.ndarray]:
    """Cross-entropy loss at a single input and its gradient w.r.t. the input."""
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    losses, grads = batch_losses_and_input_gradients(net, x, np.asarray([y] if squeeze else y))
    if squeeze:
        return float(losses[0]), grads[0]
    return float(losses.mean()), grads


def logits_and_class_gradients(net: Network, inputs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Logits (n, C) and the input gradient of every logit, shape (n, C, d).

    Used by linearization attacks that need the full per-class jacobian.
    """
    x = _as_batch_2d(inputs)
    pre, post = _forward_cached(net, x)
    n = x.shape[0]
    grads = np.empty((n, net.class_count, net.input_dim))
    eye = np.eye(net.class_count)
    for k in range(net.class_count):
        delta = np.broadcast_to(eye[k], (n, net.class_count)).copy()
        grads[:, k, :] = _backprop_to_input(net, pre, delta)
    return post[-1], grads


def train(net: Network, data: LabeledBatch, cfg: TrainConfig) -> tuple[Network, list[float]]:
    """Mini-batch SGD on softmax cross-entropy. Mutates ``net`` in place.

    Returns the network and the mean training loss of each epoch. The shuffle
    stream is seeded by ``cfg.rng_seed``, so runs are reproducible.
    """
    if len(data) == 0:
        raise InputError("training data is empty")
    _check_labels(net, data.labels)
    rng = np.random.default_rng(cfg.rng_seed)
    history = []
    n = len(data)
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            total += _sgd_step(net, data.inputs[idx], data.labels[idx], cfg.learning_rate)
        history.append(total / n)
    return net, history


def _sgd_step(net: Network, x: np.ndarray, y: np.ndarray, lr: float) -> float:
    """One gradient step on a batch; returns the summed batch loss."""
    pre, post = _forward_cached(net, x)
    m = x.shape[0]
    logp = _log_softmax(pre[-1])
    loss_sum = float(-logp[np.arange(m), y].sum())
    delta = np.exp(logp)
    delta[np.arange(m), y] -= 1.0
    delta /= m
    for li in range(len(net.layers) - 1, -1, -1):
        layer = net.layers[li]
        if layer.activation == "relu":
            delta = delta * (pre[li] > 0)
        grad_w = delta.T @ post[li]
        grad_b = delta.sum(axis=0)
        if li > 0:
            delta = delta @ layer.weights
        layer.weights -= lr * grad_w
        layer.biases -= lr * grad_b
    return loss_sum


def evaluate(net: Network, data: LabeledBatch) -> EvalReport:
    """Accuracy, mean cross-entropy loss, macro precision/recall, confusion."""
    if len(data) == 0:
        raise InputError("evaluation data is empty")
    y = _check_labels(net, data.labels)
    z = logits(net, data.inputs)
    logp = _log_softmax(z)
    mean_loss = float(-logp[np.arange(len(data)), y].mean())
    pred = np.argmax(z, axis=1)
    return report_from_predictions(y, pred, net.class_count, mean_loss)


def save_model(net: Network, path: str, seed: int | None = None, metadata: dict | None = None) -> None:
    doc = {
        "format": MODEL_FORMAT,
        "version": MODEL_VERSION,
        "class_count": net.class_count,
        "seed": seed,
        "metadata": metadata or {},
        "layers": [
            {
                "out": layer.out_dim,
                "in": layer.in_dim,
                "activation": layer.activation,
                "weights": layer.weights.ravel().tolist(),
                "biases": layer.biases.tolist(),
            }
            for layer in net.layers
        ],
    }
    tmp = path + ".tmp"
    with open(tmp, "w") as fh:
        json.dump(doc, fh)
    os.replace(tmp, path)


def load_model(path: str) -> Network:
    """Load a model document, validating format and dimension chaining."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != MODEL_FORMAT:
        raise FormatError(f"not a model document: format={doc.get('format')!r}")
    if doc.get("version") != MODEL_VERSION:
        raise FormatError(f"unsupported model version {doc.get('version')!r}")
    layers = []
    for spec in doc["layers"]:
        w = np.asarray(spec["weights"], dtype=np.float64)
        if w.size != spec["out"] * spec["in"]:
            raise FormatError(
                f"layer payload has {w.size} weights, header says {spec['out']}x{spec['in']}"
            )
        layers.append(DenseLayer(w.reshape(spec["out"], spec["in"]), np.asarray(spec["biases"]), spec["activation"]))
    return Network(layers, class_count=doc["class_count"])
