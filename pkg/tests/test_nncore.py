import numpy as np
import pytest

from rads import nncore
from rads.errors import LabelError, ParameterError, ShapeError

from helpers import analytic_gradients, batch_ce_loss, max_rel_error, numeric_gradients


def zero_net(dims, dropout=0.0):
    net = nncore.init_mlp(dims, dropout_rate=dropout, rng=np.random.default_rng(0))
    for w in net.weights:
        w[:] = 0.0
    for b in net.biases:
        b[:] = 0.0
    return net


class TestForward:
    def test_zero_network_gives_uniform_softmax(self):
        net = zero_net([3, 4, 2])
        logits, _ = nncore.forward(net, np.array([1.0, -2.0, 0.5]))
        np.testing.assert_allclose(logits, [0.0, 0.0])
        np.testing.assert_allclose(nncore.softmax(logits), [0.5, 0.5])

    def test_dropout_rate_zero_matches_deterministic(self):
        net = nncore.init_mlp([3, 8, 2], dropout_rate=0.0, rng=np.random.default_rng(1))
        x = np.array([0.3, -1.2, 2.0])
        det, _ = nncore.forward(net, x, "deterministic")
        drop, _ = nncore.forward(net, x, "dropout", np.random.default_rng(7))
        np.testing.assert_array_equal(det, drop)

    def test_same_seed_same_mask(self):
        net = nncore.init_mlp([3, 16, 2], dropout_rate=0.5, rng=np.random.default_rng(2))
        x = np.array([1.0, 1.0, 1.0])
        a, _ = nncore.forward(net, x, "dropout", np.random.default_rng(99))
        b, _ = nncore.forward(net, x, "dropout", np.random.default_rng(99))
        np.testing.assert_array_equal(a, b)

    def test_input_shape_error(self):
        net = nncore.init_mlp([3, 4, 2], rng=np.random.default_rng(0))
        with pytest.raises(ShapeError):
            nncore.forward(net, np.array([1.0, 2.0]))

    def test_unknown_mode_rejected(self):
        net = nncore.init_mlp([2, 4, 2], rng=np.random.default_rng(0))
        with pytest.raises(ParameterError):
            nncore.forward(net, np.zeros(2), "train")

    def test_inverted_dropout_expectation(self):
        """Mean dropout-mode hidden activation approximates the deterministic
        one within 3 standard errors over many masks."""
        rng = np.random.default_rng(3)
        net = nncore.init_mlp([2, 6, 2], dropout_rate=0.4, rng=rng)
        x = np.array([0.7, -0.4])
        _, det_cache = nncore.forward(net, x)
        det_hidden = det_cache.layer_inputs[1][0]

        mask_rng = np.random.default_rng(4)
        n_masks = 10000
        samples = np.empty((n_masks, 6))
        for i in range(n_masks):
            _, cache = nncore.forward(net, x, "dropout", mask_rng)
            samples[i] = cache.layer_inputs[1][0]
        mean = samples.mean(axis=0)
        sem = samples.std(axis=0, ddof=1) / np.sqrt(n_masks)
        # units with zero activation have zero sem; compare only live ones
        live = det_hidden != 0.0
        assert np.all(np.abs(mean[live] - det_hidden[live]) <= 3 * sem[live])


class TestTrainStep:
    def test_near_one_hot_prediction_gives_zero_loss(self):
        # a huge logit margin makes softmax numerically one-hot
        net = zero_net([2, 2])
        net.weights[0][:] = np.array([[100.0, -100.0], [-100.0, 100.0]])
        opt = nncore.init_adam(net, 1e-3)
        inputs = np.array([[1.0, 0.0], [0.0, 1.0]])
        labels = np.array([0, 1])
        loss = nncore.train_step(net, opt, (inputs, labels))
        assert loss == pytest.approx(0.0, abs=1e-9)

    def test_loss_decreases_on_separable_blobs(self):
        for seed in range(5):
            rng = np.random.default_rng([5, seed])
            net = nncore.init_mlp([2, 8, 2], rng=rng)
            opt = nncore.init_adam(net, 1e-2)
            n = 60
            labels = np.array([0] * (n // 2) + [1] * (n // 2))
            feats = np.where(labels[:, None] == 0, -2.0, 2.0) + rng.normal(0, 0.5, (n, 2))
            first = nncore.train_step(net, opt, (feats, labels))
            last = first
            for _ in range(199):
                last = nncore.train_step(net, opt, (feats, labels))
            assert last < first

    def test_uniform_class_weights_match_unweighted(self):
        rng = np.random.default_rng(6)
        net = nncore.init_mlp([2, 4, 2], rng=rng)
        twin = nncore.clone_mlp(net)
        inputs = rng.normal(size=(10, 2))
        labels = rng.integers(0, 2, size=10)
        l1 = nncore.train_step(net, nncore.init_adam(net, 1e-3), (inputs, labels))
        l2 = nncore.train_step(twin, nncore.init_adam(twin, 1e-3), (inputs, labels),
                               class_weights=np.ones(2))
        assert l1 == l2

    def test_label_out_of_range(self):
        net = nncore.init_mlp([2, 4, 2], rng=np.random.default_rng(0))
        opt = nncore.init_adam(net, 1e-3)
        with pytest.raises(LabelError):
            nncore.train_step(net, opt, (np.zeros((2, 2)), np.array([0, 2])))

    def test_empty_batch_rejected(self):
        net = nncore.init_mlp([2, 4, 2], rng=np.random.default_rng(0))
        opt = nncore.init_adam(net, 1e-3)
        with pytest.raises(ParameterError):
            nncore.train_step(net, opt, (np.zeros((0, 2)), np.array([], dtype=int)))

    def test_seeded_training_is_bit_identical(self):
        results = []
        for _ in range(2):
            rng = np.random.default_rng(77)
            net = nncore.init_mlp([2, 6, 2], dropout_rate=0.3, rng=rng)
            opt = nncore.init_adam(net, 1e-2)
            data_rng = np.random.default_rng(78)
            inputs = data_rng.normal(size=(20, 2))
            labels = data_rng.integers(0, 2, size=20)
            step_rng = np.random.default_rng(79)
            for _ in range(10):
                nncore.train_step(net, opt, (inputs, labels), rng=step_rng)
            results.append([w.copy() for w in net.weights])
        for a, b in zip(results[0], results[1]):
            np.testing.assert_array_equal(a, b)


class TestMcPasses:
    def test_default_pass_count_shape(self):
        net = nncore.init_mlp([2, 8, 2], dropout_rate=0.3, rng=np.random.default_rng(8))
        rows = nncore.mc_passes(net, np.array([0.1, 0.2]), 10, np.random.default_rng(9))
        assert rows.shape == (10, 2)

    def test_no_dropout_rows_identical(self):
        net = nncore.init_mlp([2, 8, 2], dropout_rate=0.0, rng=np.random.default_rng(8))
        rows = nncore.mc_passes(net, np.array([0.1, 0.2]), 5, np.random.default_rng(9))
        for k in range(1, 5):
            np.testing.assert_array_equal(rows[0], rows[k])

    def test_rows_are_probabilities(self):
        net = nncore.init_mlp([2, 8, 2], dropout_rate=0.5, rng=np.random.default_rng(8))
        rows = nncore.mc_passes(net, np.array([2.0, -3.0]), 20, np.random.default_rng(10))
        assert np.all(rows > 0) and np.all(rows < 1)
        np.testing.assert_allclose(rows.sum(axis=1), 1.0, atol=1e-9)

    def test_zero_passes_rejected(self):
        net = nncore.init_mlp([2, 8, 2], rng=np.random.default_rng(8))
        with pytest.raises(ParameterError):
            nncore.mc_passes(net, np.array([0.1, 0.2]), 0, np.random.default_rng(0))


class TestGradients:
    def test_gradient_check_random_small_nets(self):
        """Analytic CE gradients match central finite differences."""
        rng = np.random.default_rng(11)
        for trial in range(10):
            dims = [2, int(rng.integers(2, 6)), int(rng.integers(2, 5)), 2]
            net = nncore.init_mlp(dims, rng=rng)
            for b in net.biases:
                b[:] = rng.normal(0, 0.3, size=b.shape)  # keep pre-activations off the ReLU kink
            inputs = rng.normal(size=(4, 2))
            labels = rng.integers(0, 2, size=4)
            aw, ab = analytic_gradients(net, inputs, labels)
            nw, nb = numeric_gradients(net, inputs, labels)
            assert max_rel_error(aw + ab, nw + nb) < 1e-4

    def test_loss_matches_independent_recomputation(self):
        rng = np.random.default_rng(12)
        net = nncore.init_mlp([2, 5, 2], rng=rng)
        inputs = rng.normal(size=(8, 2))
        labels = rng.integers(0, 2, size=8)
        opt = nncore.init_adam(net, 1e-9)  # tiny step: loss is pre-update anyway
        expected = batch_ce_loss(net, inputs, labels)
        loss = nncore.train_step(net, opt, (inputs, labels))
        assert loss == pytest.approx(expected, abs=1e-12)
