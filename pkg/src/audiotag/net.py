"""Minimal dense neural-network engine.

Forward/backward passes for stacks of fully-connected layers with relu,
sigmoid or linear activations; mean-squared-error and binary cross-entropy
losses; minibatch SGD with momentum; classic dropout (units zeroed at
train time, weights scaled by (1 - rate) at inference); and a
finite-difference gradient checker.

Each layer owns the dropout rate of its *input* units, so the inference
scaling multiplies that layer's weights. All state is float64 numpy and
every source of randomness is an explicit Generator, which makes training
bit-reproducible for a fixed seed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError

ACTIVATIONS = ("relu", "sigmoid", "linear")
LOSS_KINDS = ("mse", "bce")


def sigmoid(x):
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def _activate(pre, kind):
    if kind == "relu":
        return np.maximum(pre, 0.0)
    if kind == "sigmoid":
        return sigmoid(pre)
    if kind == "linear":
        return pre
    raise ConfigError("unknown activation %r" % kind)


def _activation_grad(pre, post, kind):
    """d(post)/d(pre) evaluated elementwise."""
    if kind == "relu":
        return (pre > 0.0).astype(pre.dtype)
    if kind == "sigmoid":
        return post * (1.0 - post)
    if kind == "linear":
        return np.ones_like(pre)
    raise ConfigError("unknown activation %r" % kind)


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    biases: np.ndarray  # (out,)
    activation: str = "linear"
    dropout_rate: float = 0.0  # drop probability of this layer's inputs

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ConfigError("unknown activation %r" % self.activation)
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError("dropout rate must lie in [0, 1)")

    @property
    def in_dim(self):
        return self.weights.shape[1]

    @property
    def out_dim(self):
        return self.weights.shape[0]


def glorot_init(out_dim, in_dim, rng):
    """Uniform in +-sqrt(6 / (fan_in + fan_out)); biases start at zero."""
    limit = np.sqrt(6.0 / (in_dim + out_dim))
    return rng.uniform(-limit, limit, size=(out_dim, in_dim))


class Mlp:
    """Ordered stack of dense layers acting on row-vector batches."""

    def __init__(self, layers, seed=None):
        if not layers:
            raise ConfigError("an Mlp needs at least one layer")
        for prev, nxt in zip(layers, layers[1:]):
            if prev.out_dim != nxt.in_dim:
                raise ConfigError(
                    "layer dims do not chain: %d -> %d" % (prev.out_dim, nxt.in_dim)
                )
        self.layers = list(layers)
        self.seed = seed

    @classmethod
    def build(cls, dims, activations, dropout_rates=None, seed=0):
        """Construct with Glorot-uniform weights from a size chain.

        ``dims`` has one more entry than ``activations``;
        ``dropout_rates[i]`` drops the inputs of layer i (index 0 = the
        network input).
        """
        if len(dims) != len(activations) + 1:
            raise ConfigError("need len(dims) == len(activations) + 1")
        if dropout_rates is None:
            dropout_rates = [0.0] * len(activations)
        if len(dropout_rates) != len(activations):
            raise ConfigError("need one dropout rate per layer")
        rng = np.random.default_rng(seed)
        layers = [
            DenseLayer(
                weights=glorot_init(out_d, in_d, rng),
                biases=np.zeros(out_d),
                activation=act,
                dropout_rate=rate,
            )
            for in_d, out_d, act, rate in zip(dims, dims[1:], activations, dropout_rates)
        ]
        return cls(layers, seed=seed)

    @property
    def input_dim(self):
        return self.layers[0].in_dim

    @property
    def output_dim(self):
        return self.layers[-1].out_dim

    def copy(self):
        return Mlp(
            [
                DenseLayer(
                    weights=layer.weights.copy(),
                    biases=layer.biases.copy(),
                    activation=layer.activation,
                    dropout_rate=layer.dropout_rate,
                )
                for layer in self.layers
            ],
            seed=self.seed,
        )

    def _trace(self, x, mode="infer", rng=None, layers=None):
        """Run the stack keeping everything backprop needs.

        Returns (inputs, pres, posts, masks) where inputs[i] is the
        (possibly masked) batch fed to layer i.
        """
        layers = self.layers if layers is None else layers
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        if x.shape[1] != layers[0].in_dim:
            raise ConfigError(
                "input dim %d does not match network input %d"
                % (x.shape[1], layers[0].in_dim)
            )
        if mode not in ("train", "infer"):
            raise ConfigError("mode must be 'train' or 'infer'")
        if mode == "train" and rng is None and any(l.dropout_rate > 0.0 for l in layers):
            raise ConfigError("train-mode forward needs a random generator for masks")

        inputs, pres, posts, masks = [], [], [], []
        a = x
        for layer in layers:
            if mode == "train" and layer.dropout_rate > 0.0:
                mask = (rng.random(a.shape) >= layer.dropout_rate).astype(a.dtype)
                a = a * mask
            else:
                mask = None
            w = layer.weights
            if mode == "infer" and layer.dropout_rate > 0.0:
                w = w * (1.0 - layer.dropout_rate)
            inputs.append(a)
            masks.append(mask)
            pre = a @ w.T + layer.biases
            post = _activate(pre, layer.activation)
            pres.append(pre)
            posts.append(post)
            a = post
        return inputs, pres, posts, masks

    def forward(self, x, mode="infer", rng=None):
        """Per-layer activations; the last entry is the network output."""
        _, _, posts, _ = self._trace(x, mode=mode, rng=rng)
        return posts

    def predict(self, x):
        out = self.forward(x)[-1]
        return out[0] if np.ndim(x) == 1 else out


def loss_and_gradient(model, x, targets, kind="bce", mode="train", rng=None):
    """Batch loss and backpropagated parameter gradients.

    MSE follows the per-batch mean of the squared error norm; BCE is the
    standard non-negative binary cross-entropy, also averaged over the
    batch and computed in the numerically fused form from the pre-sigmoid
    outputs.

    Returns (loss, grads) with grads a list of (dW, db) per layer.
    """
    if kind not in LOSS_KINDS:
        raise ConfigError("unknown loss kind %r" % kind)
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    if targets.shape[0] != x.shape[0]:
        raise ConfigError("batch and target row counts differ")
    out_layer = model.layers[-1]
    if kind == "bce":
        if out_layer.activation != "sigmoid":
            raise ConfigError("bce loss requires a sigmoid output layer")
        if np.any(targets < 0.0) or np.any(targets > 1.0):
            raise ConfigError("bce targets must lie in [0, 1]")
    n = x.shape[0]

    inputs, pres, posts, masks = model._trace(x, mode=mode, rng=rng)
    pre_out = pres[-1]
    post_out = posts[-1]

    if kind == "bce":
        # softplus(pre) - t * pre, stable for either sign of pre
        loss = float(
            np.sum(np.logaddexp(0.0, pre_out) - targets * pre_out) / n
        )
        delta = (post_out - targets) / n  # gradient wrt pre-activation
    else:
        diff = post_out - targets
        loss = float(np.sum(diff * diff) / n)
        delta = (2.0 / n) * diff * _activation_grad(pre_out, post_out, out_layer.activation)

    if not np.isfinite(loss):
        raise NumericError(
            "non-finite %s loss on a batch of %d samples (inputs finite: %s)"
            % (kind, n, bool(np.all(np.isfinite(x))))
        )

    grads = [None] * len(model.layers)
    for i in range(len(model.layers) - 1, -1, -1):
        layer = model.layers[i]
        # In infer mode the forward used (1 - rate)-scaled weights, so the
        # chain rule carries the same factor.
        scale = 1.0
        if mode == "infer" and layer.dropout_rate > 0.0:
            scale = 1.0 - layer.dropout_rate
        grads[i] = (scale * (delta.T @ inputs[i]), delta.sum(axis=0))
        if i == 0:
            break
        upstream = delta @ (scale * layer.weights)
        if masks[i] is not None:
            upstream = upstream * masks[i]
        prev = model.layers[i - 1]
        delta = upstream * _activation_grad(pres[i - 1], posts[i - 1], prev.activation)
    return loss, grads


def evaluate_loss(model, x, targets, kind="bce"):
    """Loss with dropout off (inference weights), no gradients."""
    loss, _ = loss_and_gradient(model, x, targets, kind=kind, mode="infer")
    return loss


class MomentumSgd:
    """v <- momentum * v - lr * g; theta <- theta + v, per parameter."""

    def __init__(self, learning_rate, momentum=0.0):
        self.learning_rate = learning_rate
        self.momentum = momentum
        self._velocity = None

    def step(self, model, grads):
        if self._velocity is None:
            self._velocity = [
                (np.zeros_like(l.weights), np.zeros_like(l.biases)) for l in model.layers
            ]
        for layer, (dw, db), (vw, vb) in zip(model.layers, grads, self._velocity):
            vw *= self.momentum
            vw -= self.learning_rate * dw
            vb *= self.momentum
            vb -= self.learning_rate * db
            layer.weights += vw
            layer.biases += vb


def sgd_momentum_step(model, grads, learning_rate, momentum=0.0, velocity=None):
    """Single functional update step; returns the velocity for chaining."""
    opt = MomentumSgd(learning_rate, momentum)
    opt._velocity = velocity
    opt.step(model, grads)
    return opt._velocity


@dataclass
class FitHistory:
    train_loss: list = field(default_factory=list)
    val_loss: list = field(default_factory=list)
    best_epoch: int = -1
    stopped_early: bool = False


def fit_mlp(
    model,
    x,
    targets,
    kind="bce",
    learning_rate=0.005,
    momentum=0.9,
    batch_size=100,
    epochs=100,
    rng=None,
    x_val=None,
    val_targets=None,
    patience=None,
    shuffle=True,
):
    """Minibatch SGD training loop shared by the tagger and the auto-encoders.

    When a validation split and ``patience`` are given, training keeps the
    parameters of the best validation epoch and stops after ``patience``
    epochs without improvement. Per-epoch curves are returned in a
    FitHistory.
    """
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    n = x.shape[0]
    history = FitHistory()
    if epochs == 0:
        return history

    opt = MomentumSgd(learning_rate, momentum)
    best_val = np.inf
    best_params = None
    since_best = 0
    for epoch in range(epochs):
        order = rng.permutation(n) if shuffle else np.arange(n)
        epoch_loss = 0.0
        for start in range(0, n, batch_size):
            sel = order[start : start + batch_size]
            loss, grads = loss_and_gradient(
                model, x[sel], targets[sel], kind=kind, mode="train", rng=rng
            )
            opt.step(model, grads)
            epoch_loss += loss * len(sel)
        history.train_loss.append(epoch_loss / n)

        if x_val is not None:
            val = evaluate_loss(model, x_val, val_targets, kind=kind)
            history.val_loss.append(val)
            if val < best_val - 1e-12:
                best_val = val
                history.best_epoch = epoch
                best_params = [(l.weights.copy(), l.biases.copy()) for l in model.layers]
                since_best = 0
            else:
                since_best += 1
                if patience is not None and since_best >= patience:
                    history.stopped_early = True
                    break
    if best_params is not None:
        for layer, (w, b) in zip(model.layers, best_params):
            layer.weights[...] = w
            layer.biases[...] = b
    return history


def _strip_dropout(model):
    stripped = model.copy()
    for layer in stripped.layers:
        layer.dropout_rate = 0.0
    return stripped


def gradient_check(
    model, x, targets, kind="bce", tolerance=1e-4, step=1e-5, max_per_layer=200, seed=0
):
    """Compare backprop gradients against central finite differences.

    Dropout is disabled for the check. Up to ``max_per_layer`` parameters
    are sampled per weight matrix / bias vector. Returns a report dict with
    the max relative error and a pass flag.
    """
    probe = _strip_dropout(model)
    rng = np.random.default_rng(seed)
    _, grads = loss_and_gradient(probe, x, targets, kind=kind, mode="infer")

    max_rel = 0.0
    n_checked = 0
    for layer, (dw, db) in zip(probe.layers, grads):
        for param, grad in ((layer.weights, dw), (layer.biases, db)):
            flat_param = param.reshape(-1)
            flat_grad = grad.reshape(-1)
            count = min(max_per_layer, flat_param.size)
            picks = rng.choice(flat_param.size, size=count, replace=False)
            for j in picks:
                orig = flat_param[j]
                flat_param[j] = orig + step
                up = evaluate_loss(probe, x, targets, kind=kind)
                flat_param[j] = orig - step
                down = evaluate_loss(probe, x, targets, kind=kind)
                flat_param[j] = orig
                numeric = (up - down) / (2.0 * step)
                denom = max(abs(numeric), abs(flat_grad[j]), 1e-8)
                max_rel = max(max_rel, abs(numeric - flat_grad[j]) / denom)
                n_checked += 1
    return {
        "max_relative_error": max_rel,
        "n_checked": n_checked,
        "tolerance": tolerance,
        "passed": bool(max_rel < tolerance),
    }
