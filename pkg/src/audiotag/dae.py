"""Deep denoising auto-encoders over short feature windows.

A window of consecutive normalized MBK frames is corrupted by input
dropout and pushed through an encoder (hidden -> bottleneck) and a decoder
(hidden -> output) with *untied* weights. The asymmetric variant
reconstructs only the middle frame; the symmetric one reconstructs the
whole window. Training minimizes the mean squared reconstruction error;
the bottleneck activations then serve as a learned feature for the tagger.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError
from .features import FeatureMatrix
from .net import Mlp, fit_mlp

VARIANTS = ("asymmetric", "symmetric")


@dataclass
class DaeConfig:
    context_frames: int = 7  # window length, must be odd
    feature_dim: int = 40
    variant: str = "asymmetric"
    encoder_hidden: tuple = (500,)
    bottleneck: int = 50
    bottleneck_activation: str = "relu"  # "relu" or "linear"
    decoder_hidden: tuple = (500,)
    corruption: float = 0.1
    learning_rate: float = 0.005
    momentum: float = 0.9
    batch_size: int = 100
    epochs: int = 100
    cv_fraction: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ConfigError("variant must be one of %s" % (VARIANTS,))
        if self.context_frames % 2 != 1:
            raise ConfigError("context_frames must be odd so a middle frame exists")
        if self.bottleneck_activation not in ("relu", "linear"):
            raise ConfigError("bottleneck activation must be relu or linear")
        if not 0.0 <= self.corruption < 1.0:
            raise ConfigError("corruption rate must lie in [0, 1)")

    @property
    def input_dim(self):
        return self.context_frames * self.feature_dim

    @property
    def output_dim(self):
        if self.variant == "asymmetric":
            return self.feature_dim
        return self.input_dim

    @property
    def middle_slice(self):
        """Columns of the input window holding the middle frame."""
        mid = self.context_frames // 2
        return slice(mid * self.feature_dim, (mid + 1) * self.feature_dim)


@dataclass
class DaeModel:
    net: Mlp
    config: DaeConfig
    cv_errors: list = field(default_factory=list)  # per-epoch CV reconstruction MSE

    @property
    def bottleneck_index(self):
        """Index of the layer whose output is the code."""
        return len(self.config.encoder_hidden)  # encoder hiddens, then code layer

    def encoder_layers(self):
        return self.net.layers[: self.bottleneck_index + 1]

    def decoder_layers(self):
        return self.net.layers[self.bottleneck_index + 1 :]


def build_dae(config):
    """Untied encoder/decoder stack; relu everywhere except the
    configurable bottleneck and the linear output."""
    dims = [
        config.input_dim,
        *config.encoder_hidden,
        config.bottleneck,
        *config.decoder_hidden,
        config.output_dim,
    ]
    activations = (
        ["relu"] * len(config.encoder_hidden)
        + [config.bottleneck_activation]
        + ["relu"] * len(config.decoder_hidden)
        + ["linear"]
    )
    dropout = [config.corruption] + [0.0] * (len(activations) - 1)
    net = Mlp.build(dims, activations, dropout_rates=dropout, seed=config.seed)
    return DaeModel(net=net, config=config)


def window_targets(windows, config):
    """Reconstruction targets per variant: middle frame or the full window."""
    windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    if windows.shape[1] != config.input_dim:
        raise ConfigError(
            "window dim %d does not match config input %d"
            % (windows.shape[1], config.input_dim)
        )
    if config.variant == "asymmetric":
        return windows[:, config.middle_slice]
    return windows


def frame_windows(values, context_frames, stride=1):
    """Stride windows of consecutive frames with edge replication.

    Returns (n_windows, context_frames * dim), one window centered on every
    ``stride``-th frame.
    """
    values = np.asarray(values, dtype=np.float64)
    n_frames, dim = values.shape
    half = context_frames // 2
    centers = np.arange(0, n_frames, stride)
    idx = np.clip(centers[:, None] + np.arange(-half, half + 1)[None, :], 0, n_frames - 1)
    return values[idx].reshape(len(centers), context_frames * dim)


def corpus_windows(matrices, config, stride=1):
    """Concatenate the frame windows of many chunks."""
    parts = []
    for m in matrices:
        values = m.values if isinstance(m, FeatureMatrix) else np.asarray(m)
        parts.append(frame_windows(values, config.context_frames, stride=stride))
    if not parts:
        raise DataError("no chunks supplied for window construction")
    return np.concatenate(parts)


def train_dae(windows, config, model=None):
    """Train on pre-built windows; a CV split tracks reconstruction error.

    The CV error recorded per epoch is the mean squared norm of the
    reconstruction residual on held-out windows, evaluated with corruption
    off.
    """
    if model is None:
        model = build_dae(config)
    windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    targets = window_targets(windows, config)
    if config.epochs == 0:
        return model

    rng = np.random.default_rng(config.seed + 1)
    x_val = y_val = None
    if config.cv_fraction > 0.0 and len(windows) >= 10:
        n_val = max(1, int(len(windows) * config.cv_fraction))
        order = rng.permutation(len(windows))
        val_sel, train_sel = order[:n_val], order[n_val:]
        x_val, y_val = windows[val_sel], targets[val_sel]
        windows, targets = windows[train_sel], targets[train_sel]

    history = fit_mlp(
        model.net,
        windows,
        targets,
        kind="mse",
        learning_rate=config.learning_rate,
        momentum=config.momentum,
        batch_size=config.batch_size,
        epochs=config.epochs,
        rng=rng,
        x_val=x_val,
        val_targets=y_val,
        patience=None,  # fixed epoch budget; the CV curve is informational
    )
    model.cv_errors = list(history.val_loss)
    return model


def encode(model, windows):
    """Bottleneck codes for clean windows (corruption is train-time only)."""
    windows = np.asarray(windows, dtype=np.float64)
    single = windows.ndim == 1
    out = np.atleast_2d(windows)
    _, _, posts, _ = model.net._trace(out, mode="infer", layers=model.encoder_layers())
    codes = posts[-1]
    return codes[0] if single else codes


def decode(model, codes):
    """Reconstruction from bottleneck codes."""
    codes = np.asarray(codes, dtype=np.float64)
    single = codes.ndim == 1
    out = np.atleast_2d(codes)
    if out.shape[1] != model.config.bottleneck:
        raise ConfigError(
            "code dim %d does not match bottleneck %d" % (out.shape[1], model.config.bottleneck)
        )
    _, _, posts, _ = model.net._trace(out, mode="infer", layers=model.decoder_layers())
    recon = posts[-1]
    return recon[0] if single else recon


def reconstruct(model, windows):
    return decode(model, encode(model, windows))


def reconstruction_error(model, windows, per_dim=False):
    """Mean squared reconstruction norm over a corpus of clean windows."""
    windows = np.atleast_2d(np.asarray(windows, dtype=np.float64))
    targets = window_targets(windows, model.config)
    residual = reconstruct(model, windows) - targets
    err = float(np.mean(np.sum(residual * residual, axis=1)))
    if per_dim:
        return err / model.config.output_dim
    return err


def encode_corpus(model, matrix, stride=1):
    """Encode every frame position of a chunk into bottleneck codes.

    At stride 1 a chunk of F frames yields F code frames. The resulting
    matrix should be standardized with fresh NormStats before feeding the
    tagger.
    """
    values = matrix.values if isinstance(matrix, FeatureMatrix) else np.asarray(matrix)
    windows = frame_windows(values, model.config.context_frames, stride=stride)
    codes = encode(model, windows)
    chunk_id = getattr(matrix, "chunk_id", "")
    return FeatureMatrix(values=codes, kind="DAECODE", chunk_id=chunk_id)
