"""Per-layer adaptive precision controller driven by weight-norm change rates.

Each layer starts at a small bit width. After every batch the controller
compares the layer's weight l2-norm against the previous batch; whenever the
relative change rate falls below a threshold often enough, the layer's width
is escalated by a fixed step, up to the full 32 bits. Widths never decrease.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .codec import bits_to_round_to

TRACE_HEADER = ("batch", "layer", "norm", "delta", "counter", "bits")


class UnknownLayer(ValueError):
    """Raised for a layer index the controller does not track."""


def l2_norm(weights) -> float:
    """l2-norm over all entries of a layer's weights, accumulated in float64."""
    arr = np.asarray(weights, dtype=np.float64)
    return float(np.linalg.norm(arr.reshape(-1)))


def change_rate(curr_norm: float, prev_norm: float) -> float:
    """Relative norm change (curr - prev) / prev.

    A zero previous norm has no finite rate: returns 0.0 when the norm stays
    zero, +inf otherwise (never below any finite threshold).
    """
    if prev_norm > 0.0:
        return (curr_norm - prev_norm) / prev_norm
    return 0.0 if curr_norm == 0.0 else math.inf


@dataclass
class PrecisionConfig:
    """Escalation policy: threshold, patience, step, and starting width."""

    threshold: float = -2e-3
    interval: int = 50
    step_bits: int = 8
    initial_bits: int = 8
    max_bits: int = 32
    # When True an above-threshold batch clears the counter, so escalation
    # requires `interval` consecutive below-threshold batches. Default keeps
    # the counter cumulative: it resets only on escalation.
    consecutive: bool = False

    def __post_init__(self) -> None:
        if self.initial_bits not in (8, 16, 24, 32):
            raise ValueError(f"initial_bits must be one of 8/16/24/32, got {self.initial_bits}")
        if self.interval < 1:
            raise ValueError(f"interval must be >= 1, got {self.interval}")
        if self.step_bits < 1:
            raise ValueError(f"step_bits must be >= 1, got {self.step_bits}")
        if not self.initial_bits <= self.max_bits <= 32:
            raise ValueError(f"max_bits must be in [initial_bits, 32], got {self.max_bits}")


@dataclass
class LayerPrecisionState:
    """Mutable per-layer (or per-group) escalation state."""

    bits: int
    interval_counter: int = 0
    prev_norm: float | None = None
    last_delta: float | None = field(default=None, repr=False)


class PrecisionController:
    """Tracks one escalation state per layer (or per layer group).

    `layer_groups`, when given, maps each layer index to a group id so that
    several layers share one state; callers then observe each group once per
    batch with the combined norm of its layers.
    """

    def __init__(
        self,
        num_layers: int,
        config: PrecisionConfig,
        layer_groups: list[int] | None = None,
    ) -> None:
        if num_layers < 1:
            raise ValueError(f"num_layers must be >= 1, got {num_layers}")
        if layer_groups is None:
            layer_groups = list(range(num_layers))
        if len(layer_groups) != num_layers:
            raise ValueError("layer_groups must assign a group to every layer")
        self.config = config
        self._groups = list(layer_groups)
        self._states = {
            g: LayerPrecisionState(bits=config.initial_bits) for g in sorted(set(layer_groups))
        }

    @property
    def num_layers(self) -> int:
        return len(self._groups)

    def group_of(self, layer: int) -> int:
        if not 0 <= layer < len(self._groups):
            raise UnknownLayer(f"layer {layer} outside [0, {len(self._groups)})")
        return self._groups[layer]

    def state(self, layer: int) -> LayerPrecisionState:
        return self._states[self.group_of(layer)]

    def observe_batch(self, layer: int, curr_norm: float) -> int:
        """Feed one post-update norm observation; returns the layer's bits.

        The first observation only records the norm. Afterwards the change
        rate is tested against the threshold, the counter advances, and the
        width escalates by step_bits (clamped to max_bits) whenever the
        counter fills, resetting the counter.
        """
        return self.observe_group(self.group_of(layer), curr_norm)

    def observe_group(self, group: int, curr_norm: float) -> int:
        st = self._states[group]
        cfg = self.config
        if st.prev_norm is None:
            st.last_delta = None
        else:
            delta = change_rate(curr_norm, st.prev_norm)
            st.last_delta = delta
            if delta < cfg.threshold:
                st.interval_counter += 1
            elif cfg.consecutive:
                st.interval_counter = 0
        if st.interval_counter == cfg.interval:
            st.bits = min(st.bits + cfg.step_bits, cfg.max_bits)
            st.interval_counter = 0
        st.prev_norm = curr_norm
        return st.bits

    def current_bits(self, layer: int) -> int:
        return self.state(layer).bits

    def current_round_to(self, layer: int) -> int:
        """Bytes to keep for this layer's transfers: its bits rounded up."""
        return bits_to_round_to(self.state(layer).bits)


class FixedPrecision:
    """Degenerate schedule pinning every layer at one width (baseline/oracle)."""

    def __init__(self, num_layers: int, bits: int) -> None:
        if not 1 <= bits <= 32:
            raise ValueError(f"bits must be in [1, 32], got {bits}")
        self._num_layers = num_layers
        self._bits = bits

    @property
    def num_layers(self) -> int:
        return self._num_layers

    def _check(self, layer: int) -> None:
        if not 0 <= layer < self._num_layers:
            raise UnknownLayer(f"layer {layer} outside [0, {self._num_layers})")

    def current_bits(self, layer: int) -> int:
        self._check(layer)
        return self._bits

    def current_round_to(self, layer: int) -> int:
        self._check(layer)
        return bits_to_round_to(self._bits)
