"""Fully-connected classifier and momentum SGD, sized for codec experiments.

Hidden layers use ReLU, the output layer softmax with cross-entropy. All math
runs in the dtype of the network's arrays (float32 in training, float64 in
gradient checks). Gradient gathering uses a fixed pairwise reduction so that
regrouping contributions across simulated workers is bit-stable.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class ShapeMismatch(ValueError):
    """Raised when inputs, labels, or gradients do not fit the network."""


class NonFiniteParameters(FloatingPointError):
    """Raised when an update step produces NaN or Inf parameters."""


@dataclass
class Layer:
    weights: np.ndarray  # (fan_in, fan_out)
    biases: np.ndarray  # (fan_out,)


@dataclass
class Network:
    layers: list[Layer]

    @property
    def layer_sizes(self) -> list[int]:
        return [self.layers[0].weights.shape[0]] + [l.weights.shape[1] for l in self.layers]

    @property
    def parameter_count(self) -> int:
        return sum(l.weights.size + l.biases.size for l in self.layers)


@dataclass
class SgdConfig:
    learning_rate: float
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 64
    # Optional exponential schedule; 0 disables it.
    lr_decay_every: int = 0
    lr_decay_factor: float = 0.16

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ValueError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ValueError(f"weight_decay must be >= 0, got {self.weight_decay}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")


@dataclass
class GradientSet:
    """Mean-loss gradients for every parameter, from `sample_count` samples."""

    weight_grads: list[np.ndarray]
    bias_grads: list[np.ndarray]
    sample_count: int


@dataclass
class ForwardPass:
    """Cache of one forward run, consumed by backward()."""

    layer_inputs: list[np.ndarray]  # input to each layer, post-activation
    hidden_masks: list[np.ndarray]  # ReLU derivative masks, per hidden layer
    probs: np.ndarray  # softmax outputs, one row per sample
    loss: float | None  # mean cross-entropy; None when labels were not given


@dataclass
class SgdState:
    """Momentum velocity buffers matching a network's parameter shapes."""

    vel_weights: list[np.ndarray] = field(default_factory=list)
    vel_biases: list[np.ndarray] = field(default_factory=list)


def init_network(layer_sizes, rng: np.random.Generator, dtype=np.float32) -> Network:
    """Build a network with N(0, 1e-2) weights and zero biases."""
    sizes = list(layer_sizes)
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError(f"layer_sizes needs >= 2 positive entries, got {sizes}")
    layers = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        w = rng.normal(0.0, 0.1, size=(fan_in, fan_out)).astype(dtype)
        b = np.zeros(fan_out, dtype=dtype)
        layers.append(Layer(w, b))
    return Network(layers)


def init_sgd_state(net: Network) -> SgdState:
    return SgdState(
        vel_weights=[np.zeros_like(l.weights) for l in net.layers],
        vel_biases=[np.zeros_like(l.biases) for l in net.layers],
    )


def learning_rate_at(cfg: SgdConfig, step: int) -> float:
    """Learning rate for a global batch index under the optional decay."""
    if cfg.lr_decay_every <= 0:
        return cfg.learning_rate
    return cfg.learning_rate * cfg.lr_decay_factor ** (step // cfg.lr_decay_every)


def _check_labels(labels, batch: int, classes: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.shape != (batch,):
        raise ShapeMismatch(f"labels shape {y.shape} != ({batch},)")
    if y.size and (y.min() < 0 or y.max() >= classes):
        raise ShapeMismatch(f"labels outside [0, {classes})")
    return y.astype(np.intp)


def forward(net: Network, inputs, labels=None) -> ForwardPass:
    """Run a batch through the network.

    Returns the activation cache and softmax outputs; when `labels` is given
    the mean cross-entropy loss is computed as well (via log-sum-exp).
    """
    dtype = net.layers[0].weights.dtype
    x = np.asarray(inputs, dtype=dtype)
    if x.ndim != 2:
        raise ShapeMismatch(f"inputs must be 2-D (batch, features), got shape {x.shape}")
    if x.shape[0] == 0:
        raise ShapeMismatch("empty batch")
    if x.shape[1] != net.layers[0].weights.shape[0]:
        raise ShapeMismatch(
            f"input width {x.shape[1]} != first layer fan_in {net.layers[0].weights.shape[0]}"
        )
    layer_inputs = [x]
    hidden_masks = []
    for layer in net.layers[:-1]:
        z = layer_inputs[-1] @ layer.weights + layer.biases
        mask = z > 0
        hidden_masks.append(mask)
        layer_inputs.append(np.where(mask, z, z.dtype.type(0)))
    last = net.layers[-1]
    logits = layer_inputs[-1] @ last.weights + last.biases

    shifted = logits - logits.max(axis=1, keepdims=True)
    exp = np.exp(shifted)
    sums = exp.sum(axis=1)
    probs = exp / sums[:, None]

    loss = None
    if labels is not None:
        y = _check_labels(labels, x.shape[0], logits.shape[1])
        per_sample = np.log(sums) - shifted[np.arange(x.shape[0]), y]
        loss = float(np.mean(per_sample, dtype=np.float64))
    return ForwardPass(layer_inputs, hidden_masks, probs, loss)


def backward(net: Network, fwd: ForwardPass, labels) -> GradientSet:
    """Gradients of the mean cross-entropy loss w.r.t. every parameter."""
    n = fwd.probs.shape[0]
    y = _check_labels(labels, n, fwd.probs.shape[1])
    dtype = fwd.probs.dtype

    delta = fwd.probs.copy()
    delta[np.arange(n), y] -= dtype.type(1)
    delta /= dtype.type(n)

    weight_grads: list[np.ndarray] = [None] * len(net.layers)  # type: ignore[list-item]
    bias_grads: list[np.ndarray] = [None] * len(net.layers)  # type: ignore[list-item]
    for i in range(len(net.layers) - 1, -1, -1):
        weight_grads[i] = fwd.layer_inputs[i].T @ delta
        bias_grads[i] = delta.sum(axis=0)
        if i > 0:
            delta = (delta @ net.layers[i].weights.T) * fwd.hidden_masks[i - 1]
    return GradientSet(weight_grads, bias_grads, n)


def pairwise_sum(arrays: list) -> np.ndarray:
    """Reduce by adjacent pairing, level by level.

    The association tree depends only on list length, so a contiguous
    power-of-two regrouping of the leaves reduces to bit-identical results.
    """
    if not arrays:
        raise ValueError("pairwise_sum of no arrays")
    level = list(arrays)
    while len(level) > 1:
        nxt = [level[i] + level[i + 1] for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


def gather_and_update(
    net: Network,
    contributions: list[GradientSet],
    cfg: SgdConfig,
    state: SgdState | None = None,
    lr: float | None = None,
) -> Network:
    """Average gradient contributions and apply one momentum SGD step.

    Contributions are weighted by sample count and combined with a pairwise
    sum in the given order. Weight decay adds `weight_decay * W` to the
    weight gradient (never to biases); then v = momentum * v + g and
    W -= lr * v. Raises NonFiniteParameters if the step produces NaN/Inf.
    """
    if not contributions:
        raise ShapeMismatch("no gradient contributions")
    for c in contributions:
        if len(c.weight_grads) != len(net.layers):
            raise ShapeMismatch(
                f"contribution has {len(c.weight_grads)} layers, network has {len(net.layers)}"
            )
        for g, layer in zip(c.weight_grads, net.layers):
            if g.shape != layer.weights.shape:
                raise ShapeMismatch(f"gradient shape {g.shape} != weights {layer.weights.shape}")
        for g, layer in zip(c.bias_grads, net.layers):
            if g.shape != layer.biases.shape:
                raise ShapeMismatch(f"gradient shape {g.shape} != biases {layer.biases.shape}")

    if state is None:
        state = init_sgd_state(net)
    if lr is None:
        lr = cfg.learning_rate
    total = sum(c.sample_count for c in contributions)
    dtype = net.layers[0].weights.dtype

    for i, layer in enumerate(net.layers):
        gw = pairwise_sum([c.weight_grads[i] * dtype.type(c.sample_count) for c in contributions])
        gw /= dtype.type(total)
        if cfg.weight_decay:
            gw += dtype.type(cfg.weight_decay) * layer.weights
        vw = state.vel_weights[i]
        vw *= dtype.type(cfg.momentum)
        vw += gw
        layer.weights -= dtype.type(lr) * vw

        gb = pairwise_sum([c.bias_grads[i] * dtype.type(c.sample_count) for c in contributions])
        gb /= dtype.type(total)
        vb = state.vel_biases[i]
        vb *= dtype.type(cfg.momentum)
        vb += gb
        layer.biases -= dtype.type(lr) * vb

        if not (np.isfinite(layer.weights).all() and np.isfinite(layer.biases).all()):
            raise NonFiniteParameters(f"layer {i} parameters left the finite range")
    return net
