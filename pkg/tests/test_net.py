"""Dense network engine: forward, losses, backprop, SGD, dropout."""

import numpy as np
import pytest

import audiotag.net as net
from audiotag.errors import ConfigError, NumericError
from audiotag.net import (
    DenseLayer,
    Mlp,
    MomentumSgd,
    evaluate_loss,
    fit_mlp,
    gradient_check,
    loss_and_gradient,
    sgd_momentum_step,
)


def linear_layer(w, b):
    return DenseLayer(weights=np.atleast_2d(np.asarray(w, float)),
                      biases=np.atleast_1d(np.asarray(b, float)),
                      activation="linear")


class TestForward:
    def test_zero_weights_sigmoid_outputs_half(self):
        model = Mlp.build([4, 3, 2], ["relu", "sigmoid"], seed=0)
        for layer in model.layers:
            layer.weights[...] = 0.0
        out = model.forward(np.ones(4))[-1]
        np.testing.assert_array_equal(out, 0.5)

    def test_affine_identity(self):
        model = Mlp([linear_layer([[2.0]], [1.0])])
        assert model.predict(np.array([3.0]))[0] == 7.0

    def test_dimension_mismatch_raises(self):
        model = Mlp.build([4, 2], ["linear"], seed=0)
        with pytest.raises(ConfigError, match="input dim"):
            model.forward(np.ones(5))

    def test_layer_chain_validated(self):
        with pytest.raises(ConfigError, match="chain"):
            Mlp([linear_layer(np.ones((2, 3)), np.zeros(2)),
                 linear_layer(np.ones((2, 4)), np.zeros(2))])

    def test_per_layer_activations_returned(self):
        model = Mlp.build([3, 5, 2], ["relu", "linear"], seed=1)
        acts = model.forward(np.ones(3))
        assert len(acts) == 2
        assert acts[0].shape == (1, 5)
        assert acts[1].shape == (1, 2)


class TestLosses:
    def test_perfect_mse_prediction_zero_loss_zero_grads(self):
        model = Mlp([linear_layer([[1.0, 0.0], [0.0, 1.0]], [0.0, 0.0])])
        x = np.array([[0.3, -0.7], [1.5, 0.2]])
        loss, grads = loss_and_gradient(model, x, x, kind="mse", mode="infer")
        assert loss == 0.0
        for dw, db in grads:
            np.testing.assert_array_equal(dw, 0.0)
            np.testing.assert_array_equal(db, 0.0)

    def test_bce_hand_value_at_half(self):
        # zero-parameter sigmoid unit predicts 0.5; -log(0.5) = 0.6931...
        model = Mlp([DenseLayer(np.zeros((1, 1)), np.zeros(1), "sigmoid")])
        loss, _ = loss_and_gradient(model, [[1.0]], [[1.0]], kind="bce", mode="infer")
        assert loss == pytest.approx(0.6931, abs=1e-4)

    def test_bce_nonnegative_and_zero_only_when_exact(self):
        rng = np.random.default_rng(0)
        model = Mlp.build([3, 4, 2], ["relu", "sigmoid"], seed=2)
        for _ in range(20):
            x = rng.normal(size=(5, 3))
            t = rng.integers(0, 2, size=(5, 2)).astype(float)
            loss, _ = loss_and_gradient(model, x, t, kind="bce", mode="infer")
            assert loss > 0.0  # sigmoid outputs never hit 0/1 exactly

    def test_mse_nonnegative(self):
        rng = np.random.default_rng(1)
        model = Mlp.build([3, 2], ["linear"], seed=3)
        for _ in range(20):
            x = rng.normal(size=(4, 3))
            t = rng.normal(size=(4, 2))
            loss, _ = loss_and_gradient(model, x, t, kind="mse", mode="infer")
            assert loss >= 0.0

    def test_bce_requires_sigmoid_output(self):
        model = Mlp.build([3, 2], ["linear"], seed=4)
        with pytest.raises(ConfigError, match="sigmoid"):
            loss_and_gradient(model, np.ones((1, 3)), np.ones((1, 2)), kind="bce")

    def test_bce_targets_range_checked(self):
        model = Mlp.build([3, 2], ["sigmoid"], seed=4)
        with pytest.raises(ConfigError, match="targets"):
            loss_and_gradient(model, np.ones((1, 3)), [[2.0, 0.0]], kind="bce")

    @pytest.mark.filterwarnings("ignore:overflow encountered")
    def test_nonfinite_loss_raises_numeric_error(self):
        model = Mlp([linear_layer([[1e308]], [0.0])])
        with pytest.raises(NumericError, match="non-finite"):
            loss_and_gradient(model, [[1e308]], [[0.0]], kind="mse", mode="infer")


class TestGradientCheck:
    def test_shrinking_bce_net_passes(self):
        rng = np.random.default_rng(5)
        model = Mlp.build([10, 8, 4, 2], ["relu", "relu", "sigmoid"], seed=6)
        x = rng.normal(size=(6, 10))
        t = rng.integers(0, 2, size=(6, 2)).astype(float)
        report = gradient_check(model, x, t, kind="bce", tolerance=1e-4)
        assert report["passed"], report

    def test_bottleneck_mse_net_passes(self):
        rng = np.random.default_rng(7)
        model = Mlp.build([14, 8, 3, 8, 14], ["relu", "relu", "relu", "linear"], seed=8)
        # zero-init biases leave whole relu layers sitting exactly on their
        # kink (bottleneck outputs are often all-zero); nudge every bias so
        # no pre-activation is at a zero-activation boundary
        for layer in model.layers:
            layer.biases += rng.uniform(0.05, 0.15, size=layer.biases.shape)
        x = rng.normal(size=(6, 14))
        _, pres, _, _ = model._trace(x)
        assert all(np.abs(p).min() > 1e-3 for p in pres)
        report = gradient_check(model, x, x, kind="mse", tolerance=1e-4)
        assert report["passed"], report

    def test_corrupted_backward_pass_fails(self, monkeypatch):
        rng = np.random.default_rng(9)
        model = Mlp.build([5, 4, 2], ["relu", "sigmoid"], seed=10)
        x = rng.normal(size=(4, 5))
        t = rng.integers(0, 2, size=(4, 2)).astype(float)

        real = net.loss_and_gradient

        def corrupted(*args, **kwargs):
            loss, grads = real(*args, **kwargs)
            grads[0][0][0, 0] += 0.05
            return loss, grads

        monkeypatch.setattr(net, "loss_and_gradient", corrupted)
        report = net.gradient_check(model, x, t, kind="bce", tolerance=1e-4)
        assert not report["passed"]


class TestSgdMomentum:
    def test_zero_momentum_is_plain_step(self):
        model = Mlp([linear_layer([[1.0]], [0.5])])
        grads = [(np.array([[2.0]]), np.array([3.0]))]
        sgd_momentum_step(model, grads, learning_rate=0.1, momentum=0.0)
        assert model.layers[0].weights[0, 0] == pytest.approx(1.0 - 0.1 * 2.0)
        assert model.layers[0].biases[0] == pytest.approx(0.5 - 0.1 * 3.0)

    def test_two_momentum_steps_unroll(self):
        # v1 = -lr*g; v2 = 0.9*v1 - lr*g; total displacement = -lr*g*(1 + 1.9)
        model = Mlp([linear_layer([[0.0]], [0.0])])
        grads = [(np.array([[1.0]]), np.array([0.0]))]
        opt = MomentumSgd(learning_rate=0.1, momentum=0.9)
        opt.step(model, grads)
        opt.step(model, grads)
        assert model.layers[0].weights[0, 0] == pytest.approx(-0.1 * (1.0 + 1.9))

    def test_zero_gradient_is_fixed_point(self):
        model = Mlp([linear_layer([[1.25]], [-0.5])])
        grads = [(np.zeros((1, 1)), np.zeros(1))]
        sgd_momentum_step(model, grads, learning_rate=0.3, momentum=0.9)
        assert model.layers[0].weights[0, 0] == 1.25
        assert model.layers[0].biases[0] == -0.5


class TestDropout:
    def test_train_mode_requires_rng(self):
        model = Mlp.build([4, 2], ["linear"], dropout_rates=[0.5], seed=0)
        with pytest.raises(ConfigError, match="generator"):
            model.forward(np.ones(4), mode="train")

    def test_monte_carlo_mean_matches_scaled_inference(self):
        rng = np.random.default_rng(42)
        model = Mlp.build([8, 3], ["linear"], dropout_rates=[0.5], seed=11)
        x = rng.normal(size=8)
        batch = np.tile(x, (1000, 1))
        masked = model.forward(batch, mode="train", rng=np.random.default_rng(1))[-1]
        infer = model.forward(x)[-1][0]
        se = masked.std(axis=0, ddof=1) / np.sqrt(len(masked))
        assert np.all(np.abs(masked.mean(axis=0) - infer) < 3.0 * se + 1e-12)

    def test_classic_equals_inverted_dropout_up_to_weight_scale(self):
        # scaling trained weights by (1 - rate) converts the classic scheme
        # into inverted-dropout semantics, in both modes
        rate = 0.3
        rng = np.random.default_rng(12)
        w = rng.normal(size=(3, 6))
        b = rng.normal(size=3)
        x = rng.normal(size=(5, 6))
        classic = Mlp([DenseLayer(w.copy(), b.copy(), "linear", dropout_rate=rate)])

        # inference: classic scales W by (1 - rate); inverted would apply
        # the pre-scaled weights directly
        infer_classic = classic.forward(x)[-1]
        np.testing.assert_allclose(infer_classic, x @ ((1 - rate) * w).T + b, atol=1e-12)

        # training with the same mask: classic W on masked inputs equals
        # inverted (1-rate)*W on mask/(1-rate)-compensated inputs
        mask_rng = np.random.default_rng(3)
        mask = (mask_rng.random(x.shape) >= rate).astype(float)
        train_classic = classic.forward(x, mode="train", rng=np.random.default_rng(3))[-1]
        np.testing.assert_allclose(train_classic, (x * mask) @ w.T + b, atol=1e-12)
        inverted = (x * mask / (1 - rate)) @ ((1 - rate) * w).T + b
        np.testing.assert_allclose(train_classic, inverted, atol=1e-12)

    def test_no_mask_at_inference(self):
        model = Mlp.build([6, 2], ["linear"], dropout_rates=[0.5], seed=13)
        x = np.ones(6)
        a = model.forward(x)[-1]
        b = model.forward(x)[-1]
        np.testing.assert_array_equal(a, b)


class TestFitMlp:
    def test_zero_epochs_returns_untouched_model(self):
        model = Mlp.build([4, 2], ["sigmoid"], seed=14)
        before = [layer.weights.copy() for layer in model.layers]
        history = fit_mlp(model, np.ones((10, 4)), np.ones((10, 2)), epochs=0)
        assert history.train_loss == []
        for layer, w in zip(model.layers, before):
            np.testing.assert_array_equal(layer.weights, w)

    def test_training_is_bit_deterministic(self):
        rng = np.random.default_rng(15)
        x = rng.normal(size=(50, 6))
        t = (rng.random(size=(50, 2)) > 0.5).astype(float)

        def train():
            model = Mlp.build([6, 5, 2], ["relu", "sigmoid"],
                              dropout_rates=[0.1, 0.2], seed=16)
            fit_mlp(model, x, t, kind="bce", learning_rate=0.05, momentum=0.9,
                    batch_size=10, epochs=5, rng=17)
            return model

        a, b = train(), train()
        for la, lb in zip(a.layers, b.layers):
            np.testing.assert_array_equal(la.weights, lb.weights)
            np.testing.assert_array_equal(la.biases, lb.biases)

    def test_loss_decreases_on_separable_problem(self):
        rng = np.random.default_rng(18)
        x = np.vstack([rng.normal(-2.0, 0.3, size=(40, 4)), rng.normal(2.0, 0.3, size=(40, 4))])
        t = np.vstack([np.zeros((40, 1)), np.ones((40, 1))])
        model = Mlp.build([4, 6, 1], ["relu", "sigmoid"], seed=19)
        history = fit_mlp(model, x, t, kind="bce", learning_rate=0.1, momentum=0.9,
                          batch_size=16, epochs=10, rng=20)
        assert history.train_loss[-1] < history.train_loss[0]

    def test_early_stopping_restores_best_weights(self):
        rng = np.random.default_rng(21)
        x = rng.normal(size=(60, 3))
        t = (rng.random(size=(60, 1)) > 0.5).astype(float)
        model = Mlp.build([3, 4, 1], ["relu", "sigmoid"], seed=22)
        history = fit_mlp(model, x[:50], t[:50], kind="bce", learning_rate=0.5,
                          momentum=0.9, batch_size=10, epochs=50, rng=23,
                          x_val=x[50:], val_targets=t[50:], patience=3)
        assert history.best_epoch >= 0
        best_val = min(history.val_loss)
        achieved = evaluate_loss(model, x[50:], t[50:], kind="bce")
        assert achieved == pytest.approx(best_val, rel=1e-9)
