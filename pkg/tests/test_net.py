"""Network tests: forward/backward correctness against independent oracles,
update arithmetic, and shape/finiteness errors."""

import math

import numpy as np
import pytest

from weightpack import net as wpnet
from weightpack.net import (
    GradientSet,
    Layer,
    Network,
    NonFiniteParameters,
    SgdConfig,
    ShapeMismatch,
    backward,
    forward,
    gather_and_update,
    init_network,
    init_sgd_state,
    learning_rate_at,
    pairwise_sum,
)


from oracle_gradcheck import central_difference, check_layer_gradients, relative_error


class TestForward:
    def test_identity_net_softmaxes_the_input_row(self):
        layer = Layer(np.eye(4, dtype=np.float32), np.zeros(4, dtype=np.float32))
        network = Network([layer])
        x = np.zeros((1, 4), dtype=np.float32)
        x[0, 2] = 1.0
        fwd = forward(network, x)
        expected = np.exp(x[0]) / np.exp(x[0]).sum()
        assert np.allclose(fwd.probs[0], expected, atol=1e-7)

    def test_empty_batch_raises(self):
        network = init_network([3, 2], np.random.default_rng(0))
        with pytest.raises(ShapeMismatch):
            forward(network, np.zeros((0, 3), dtype=np.float32))

    def test_width_mismatch_raises(self):
        network = init_network([3, 2], np.random.default_rng(0))
        with pytest.raises(ShapeMismatch):
            forward(network, np.zeros((2, 4), dtype=np.float32))

    def test_softmax_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        network = init_network([5, 8, 3], rng)
        fwd = forward(network, rng.normal(size=(16, 5)).astype(np.float32))
        assert np.allclose(fwd.probs.sum(axis=1), 1.0, atol=1e-6)

    def test_loss_matches_float64_recomputation(self):
        rng = np.random.default_rng(2)
        network = init_network([6, 10, 4], rng)
        x = rng.normal(size=(4, 6)).astype(np.float32)
        y = rng.integers(0, 4, size=4)
        fwd = forward(network, x, y)

        # Straightforward independent recomputation in float64.
        h = x.astype(np.float64)
        h = np.maximum(h @ network.layers[0].weights.astype(np.float64)
                       + network.layers[0].biases.astype(np.float64), 0.0)
        logits = (h @ network.layers[1].weights.astype(np.float64)
                  + network.layers[1].biases.astype(np.float64))
        exp = np.exp(logits - logits.max(axis=1, keepdims=True))
        probs = exp / exp.sum(axis=1, keepdims=True)
        expected = float(np.mean([-math.log(probs[i, y[i]]) for i in range(4)]))
        assert fwd.loss == pytest.approx(expected, abs=1e-6)
        assert fwd.loss >= 0.0


class TestBackward:
    def test_matches_central_differences(self):
        # Float64 shadow network so the finite-difference oracle is tight.
        rng = np.random.default_rng(3)
        network = init_network([5, 7, 6, 3], rng, dtype=np.float64)
        x = rng.normal(size=(12, 5))
        y = rng.integers(0, 3, size=12)
        for layer in range(3):
            max_err, checked = check_layer_gradients(network, x, y, layer, rng, probes=50)
            assert checked == 50
            assert max_err <= 1e-4

    def test_zero_net_bias_gradient_closed_form(self):
        # Zero inputs and zero weights: probs are uniform, so the output bias
        # gradient is softmax(0) minus the label frequency vector.
        layer = Layer(np.zeros((3, 4), dtype=np.float32), np.zeros(4, dtype=np.float32))
        network = Network([layer])
        x = np.zeros((4, 3), dtype=np.float32)
        y = np.array([0, 0, 1, 3])
        grads = backward(network, forward(network, x, y), y)
        freq = np.array([0.5, 0.25, 0.0, 0.25])
        assert np.allclose(grads.bias_grads[0], 0.25 - freq, atol=1e-7)
        assert np.allclose(grads.weight_grads[0], 0.0)

    def test_dead_unit_gets_zero_gradient(self):
        rng = np.random.default_rng(4)
        network = init_network([4, 3, 2], rng)
        network.layers[0].biases[1] = -100.0  # unit 1 never activates
        x = rng.normal(size=(8, 4)).astype(np.float32)
        y = rng.integers(0, 2, size=8)
        grads = backward(network, forward(network, x, y), y)
        assert np.all(grads.weight_grads[0][:, 1] == 0.0)
        assert grads.bias_grads[0][1] == 0.0

    def test_label_shape_mismatch(self):
        network = init_network([3, 2], np.random.default_rng(0))
        fwd = forward(network, np.zeros((2, 3), dtype=np.float32))
        with pytest.raises(ShapeMismatch):
            backward(network, fwd, np.array([0, 1, 1]))


def scalar_net(value=1.0):
    layer = Layer(np.array([[value]], dtype=np.float32), np.zeros(1, dtype=np.float32))
    return Network([layer])


def scalar_grad(g):
    return GradientSet([np.array([[g]], dtype=np.float32)], [np.zeros(1, dtype=np.float32)], 1)


class TestGatherAndUpdate:
    def test_two_contributions_average(self):
        network = scalar_net(1.0)
        cfg = SgdConfig(learning_rate=0.1, momentum=0.0, weight_decay=0.0)
        gather_and_update(network, [scalar_grad(0.2), scalar_grad(0.4)], cfg)
        assert network.layers[0].weights[0, 0] == pytest.approx(0.97, rel=1e-6)

    def test_zero_learning_rate_is_bitwise_noop(self):
        rng = np.random.default_rng(5)
        network = init_network([4, 3], rng)
        before = network.layers[0].weights.copy()
        grads = backward(network, forward(network, rng.normal(size=(4, 4)).astype(np.float32),
                                          [0, 1, 2, 0]), [0, 1, 2, 0])
        cfg = SgdConfig(learning_rate=0.0, momentum=0.9, weight_decay=5e-4)
        gather_and_update(network, [grads], cfg)
        assert np.array_equal(network.layers[0].weights.view(np.uint32),
                              before.view(np.uint32))

    def test_momentum_two_step_trace(self):
        # Hand trace in float32: v1 = g1, w1 = w0 - lr*v1;
        # v2 = 0.9*v1 + g2, w2 = w1 - lr*v2.
        network = scalar_net(1.0)
        state = init_sgd_state(network)
        cfg = SgdConfig(learning_rate=0.1, momentum=0.9, weight_decay=0.0)
        gather_and_update(network, [scalar_grad(0.1)], cfg, state)
        gather_and_update(network, [scalar_grad(0.1)], cfg, state)
        f = np.float32
        v1 = f(0.1)
        w1 = f(1.0) - f(0.1) * v1
        v2 = f(0.9) * v1 + f(0.1)
        w2 = w1 - f(0.1) * v2
        assert network.layers[0].weights[0, 0] == w2
        assert state.vel_weights[0][0, 0] == v2

    def test_weight_decay_applies_to_weights_only(self):
        network = scalar_net(2.0)
        network.layers[0].biases[0] = 3.0
        cfg = SgdConfig(learning_rate=1.0, momentum=0.0, weight_decay=0.5)
        gather_and_update(network, [scalar_grad(0.0)], cfg)
        # weights: 2 - 1.0 * (0 + 0.5*2) = 1; biases: 3 - 0 = 3
        assert network.layers[0].weights[0, 0] == pytest.approx(1.0)
        assert network.layers[0].biases[0] == pytest.approx(3.0)

    def test_shape_mismatch_rejected(self):
        network = init_network([3, 2], np.random.default_rng(0))
        bad = GradientSet([np.zeros((2, 2), dtype=np.float32)],
                          [np.zeros(2, dtype=np.float32)], 1)
        with pytest.raises(ShapeMismatch):
            gather_and_update(network, [bad], SgdConfig(learning_rate=0.1))

    def test_nonfinite_update_raises(self):
        network = scalar_net(1.0)
        inf_grad = scalar_grad(float("inf"))
        with pytest.raises(NonFiniteParameters):
            gather_and_update(network, [inf_grad], SgdConfig(learning_rate=0.1, momentum=0.0))


class TestHelpers:
    def test_pairwise_sum_regroups_exactly(self):
        rng = np.random.default_rng(6)
        pieces = [rng.normal(size=(3, 3)).astype(np.float32) for _ in range(8)]
        whole = pairwise_sum(pieces)
        left = pairwise_sum(pieces[:4])
        right = pairwise_sum(pieces[4:])
        assert np.array_equal(whole, left + right)
        quarters = [pairwise_sum(pieces[i : i + 2]) for i in range(0, 8, 2)]
        assert np.array_equal(whole, pairwise_sum(quarters))

    def test_learning_rate_schedule(self):
        cfg = SgdConfig(learning_rate=0.1, lr_decay_every=30, lr_decay_factor=0.16)
        assert learning_rate_at(cfg, 0) == 0.1
        assert learning_rate_at(cfg, 29) == 0.1
        assert learning_rate_at(cfg, 30) == pytest.approx(0.016)
        assert learning_rate_at(cfg, 60) == pytest.approx(0.1 * 0.16**2)
        flat = SgdConfig(learning_rate=0.1)
        assert learning_rate_at(flat, 1000) == 0.1

    def test_init_network_statistics(self):
        rng = np.random.default_rng(7)
        network = init_network([100, 50, 10], rng)
        w = network.layers[0].weights
        assert w.dtype == np.float32
        assert abs(float(w.mean())) < 0.01
        assert float(w.std()) == pytest.approx(0.1, rel=0.1)
        assert np.all(network.layers[0].biases == 0.0)
        assert network.parameter_count == 100 * 50 + 50 + 50 * 10 + 10

    @pytest.mark.parametrize("kwargs", [
        dict(learning_rate=-1.0),
        dict(learning_rate=0.1, momentum=1.0),
        dict(learning_rate=0.1, weight_decay=-1e-4),
        dict(learning_rate=0.1, batch_size=0),
    ])
    def test_sgd_config_validation(self, kwargs):
        with pytest.raises(ValueError):
            SgdConfig(**kwargs)
