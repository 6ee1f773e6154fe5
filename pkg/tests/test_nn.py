import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from advlab import nn
from advlab.errors import FormatError, InputError, LabelError, ShapeError
from advlab.nn import DenseLayer, LabeledBatch, Network, TrainConfig

from conftest import random_net


def finite_difference_gradient(net, x, y, h=1e-4):
    """Central-difference oracle for the input gradient."""
    grad = np.zeros_like(x)
    for i in range(x.size):
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        lp, _ = nn.loss_and_input_gradient(net, xp, y)
        lm, _ = nn.loss_and_input_gradient(net, xm, y)
        grad[i] = (lp - lm) / (2 * h)
    return grad


class TestForward:
    def test_zero_weights_give_uniform_probabilities(self):
        net = Network([DenseLayer(np.zeros((4, 3)), np.zeros(4), "identity")], class_count=4)
        probs = nn.forward(net, np.array([[0.2, 0.9, 0.5], [0.0, 0.0, 1.0]]))
        assert np.allclose(probs, 0.25)

    def test_single_unit_preactivation(self):
        # one input, one output, identity activation: w=2, b=1, x=3 -> 7
        net = Network([DenseLayer(np.array([[2.0]]), np.array([1.0]), "identity")], class_count=1)
        assert nn.logits(net, np.array([3.0])) == pytest.approx(7.0)

    def test_width_mismatch_raises(self):
        net = nn.build_network([4, 3], rng_seed=0)
        with pytest.raises(ShapeError):
            nn.forward(net, np.zeros((2, 5)))

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_softmax_rows_sum_to_one(self, seed):
        rng = np.random.default_rng(seed)
        net = random_net(rng)
        x = rng.uniform(-5, 5, (4, net.input_dim))
        probs = nn.forward(net, x)
        assert np.all(probs >= 0)
        assert np.allclose(probs.sum(axis=1), 1.0, atol=1e-9)


class TestInputGradient:
    def test_linear_softmax_closed_form(self):
        # single linear layer: grad_x L = W^T (p - onehot(y))
        rng = np.random.default_rng(3)
        W = rng.normal(size=(3, 5))
        b = rng.normal(size=3)
        net = Network([DenseLayer(W, b, "identity")], class_count=3)
        x = rng.uniform(0, 1, 5)
        y = 2
        p = nn.forward(net, x)[0]
        expected = W.T @ (p - np.eye(3)[y])
        _, grad = nn.loss_and_input_gradient(net, x, y)
        assert np.allclose(grad, expected, atol=1e-12)
        fd = finite_difference_gradient(net, x, y)
        assert np.allclose(grad, fd, rtol=1e-4, atol=1e-8)

    def test_saturated_prediction_has_vanishing_gradient(self):
        W = np.array([[50.0, 0.0], [-50.0, 0.0]])
        net = Network([DenseLayer(W, np.zeros(2), "identity")], class_count=2)
        x = np.array([1.0, 0.5])
        probs = nn.forward(net, x)[0]
        assert probs[0] > 1 - 1e-20
        _, grad = nn.loss_and_input_gradient(net, x, 0)
        assert np.linalg.norm(grad) < 1e-12

    def test_matches_finite_differences_on_random_nets(self):
        rng = np.random.default_rng(11)
        for _ in range(10):
            net = random_net(rng, dims=[4, 4, 3])
            x = rng.uniform(0, 1, 4)
            y = int(rng.integers(0, 3))
            _, grad = nn.loss_and_input_gradient(net, x, y)
            fd = finite_difference_gradient(net, x, y)
            denom = max(np.abs(fd).max(), 1e-8)
            assert np.abs(grad - fd).max() / denom < 1e-4

    def test_invalid_class_index_raises(self):
        net = nn.build_network([3, 2], rng_seed=0)
        with pytest.raises(LabelError):
            nn.loss_and_input_gradient(net, np.zeros(3), 2)


class TestTrain:
    def test_zero_epochs_leaves_weights_unchanged(self):
        net = nn.build_network([3, 4, 2], rng_seed=5)
        before = [layer.weights.copy() for layer in net.layers]
        data = LabeledBatch(np.random.default_rng(0).uniform(0, 1, (8, 3)), np.zeros(8, dtype=int))
        _, history = nn.train(net, data, TrainConfig(epochs=0))
        assert history == []
        for layer, w in zip(net.layers, before):
            assert np.array_equal(layer.weights, w)

    def test_xor_reaches_full_training_accuracy(self):
        X = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float)
        y = np.array([0, 1, 1, 0])
        net = nn.build_network([2, 8, 2], rng_seed=0)
        cfg = TrainConfig(learning_rate=0.5, epochs=2000, batch_size=4, rng_seed=0)
        _, history = nn.train(net, LabeledBatch(X, y), cfg)
        pred = np.argmax(nn.forward(net, X), axis=1)
        assert np.array_equal(pred, y)  # exhaustive check of all 4 points
        assert len(history) == 2000
        assert np.isfinite(history).all()

    def test_fixed_seed_is_bit_reproducible(self):
        rng = np.random.default_rng(1)
        data = LabeledBatch(rng.uniform(0, 1, (40, 5)), rng.integers(0, 3, 40))
        runs = []
        for _ in range(2):
            net = nn.build_network([5, 6, 3], rng_seed=9)
            _, hist = nn.train(net, data, TrainConfig(learning_rate=0.2, epochs=4, batch_size=8, rng_seed=9))
            runs.append(([layer.weights.copy() for layer in net.layers], hist))
        for w1, w2 in zip(runs[0][0], runs[1][0]):
            assert np.array_equal(w1, w2)
        assert runs[0][1] == runs[1][1]

    def test_empty_data_rejected(self):
        net = nn.build_network([3, 2], rng_seed=0)
        with pytest.raises((InputError, ShapeError)):
            nn.train(net, LabeledBatch(np.zeros((0, 3)), np.zeros(0, dtype=int)), TrainConfig())


class TestEvaluate:
    def test_perfect_predictor(self):
        # big weights aligned with a 2-D, 2-class separable set
        net = Network(
            [DenseLayer(np.array([[-30.0, 0.0], [30.0, 0.0]]), np.array([15.0, -15.0]), "identity")],
            class_count=2,
        )
        X = np.array([[0.1, 0.3], [0.2, 0.8], [0.9, 0.1], [0.8, 0.6]])
        y = np.array([0, 0, 1, 1])
        report = nn.evaluate(net, LabeledBatch(X, y))
        assert report.accuracy == 1.0
        assert np.array_equal(report.confusion, np.diag([2, 2]))
        assert report.precision == 1.0 and report.recall == 1.0

    def test_constant_predictor_on_balanced_set(self):
        net = Network(
            [DenseLayer(np.zeros((2, 2)), np.array([1.0, 0.0]), "identity")], class_count=2
        )
        X = np.random.default_rng(0).uniform(0, 1, (10, 2))
        y = np.array([0, 1] * 5)
        report = nn.evaluate(net, LabeledBatch(X, y))
        assert report.accuracy == pytest.approx(0.5)

    def test_accuracy_is_confusion_trace_over_n(self):
        rng = np.random.default_rng(2)
        net = random_net(rng, dims=[4, 3])
        data = LabeledBatch(rng.uniform(0, 1, (30, 4)), rng.integers(0, 3, 30))
        report = nn.evaluate(net, data)
        assert report.accuracy == pytest.approx(np.trace(report.confusion) / 30)


class TestPersistence:
    def test_round_trip(self, tmp_path):
        net = nn.build_network([5, 4, 3], rng_seed=7)
        path = tmp_path / "model.json"
        nn.save_model(net, str(path), seed=7, metadata={"note": "round trip"})
        loaded = nn.load_model(str(path))
        x = np.random.default_rng(0).uniform(0, 1, (3, 5))
        assert np.array_equal(nn.forward(net, x), nn.forward(loaded, x))

    def test_load_validates_dimension_chaining(self, tmp_path):
        net = nn.build_network([5, 4, 3], rng_seed=7)
        path = tmp_path / "model.json"
        nn.save_model(net, str(path))
        doc = json.loads(path.read_text())
        doc["layers"][1]["in"] = 9
        path.write_text(json.dumps(doc))
        with pytest.raises((ShapeError, FormatError)):
            nn.load_model(str(path))

    def test_load_rejects_foreign_documents(self, tmp_path):
        path = tmp_path / "weird.json"
        path.write_text(json.dumps({"format": "something-else"}))
        with pytest.raises(FormatError):
            nn.load_model(str(path))
