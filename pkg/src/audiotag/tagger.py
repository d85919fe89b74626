"""Shrinking multi-label DNN tagger.

Context-expanded feature windows go in, 7 sigmoid tag posteriors come out.
Every window of a chunk inherits the chunk's full tag vector during
training (labels exist only at chunk level); at prediction time the
posteriors of all stride-1 windows are aggregated into one chunk score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import TAGS, TagSet
from .errors import ConfigError, DataError
from .features import context_input_dim, make_context_inputs
from .net import FitHistory, Mlp, fit_mlp

AGGREGATIONS = ("mean", "max")


@dataclass
class TaggerConfig:
    feature_kind: str = "mbk"
    feature_dim: int = 40
    context: int = 45  # half-width; 91-frame window
    noise_frames: int = 6
    hidden_sizes: tuple = (1000, 500)
    learning_rate: float = 0.005
    momentum: float = 0.9
    batch_size: int = 100
    dropout_input: float = 0.1
    dropout_hidden: float = 0.2
    loss_kind: str = "bce"
    epochs: int = 100
    patience: int = 10
    validation_fraction: float = 0.1
    train_stride: int = 5
    predict_stride: int = 1
    aggregation: str = "mean"
    threshold: float = 0.4
    seed: int = 0

    def __post_init__(self):
        if list(self.hidden_sizes) != sorted(self.hidden_sizes, reverse=True):
            raise ConfigError("hidden sizes must shrink with depth")
        if self.aggregation not in AGGREGATIONS:
            raise ConfigError("aggregation must be one of %s" % (AGGREGATIONS,))

    @property
    def input_dim(self):
        return context_input_dim(self.feature_dim, self.context)


@dataclass
class ChunkScore:
    chunk_id: str
    posteriors: np.ndarray  # 7 values in [0, 1], ordered as TAGS

    def score_for(self, tag):
        return float(self.posteriors[TAGS.index(tag)])


def build_tagger(config):
    """Fresh shrinking network for the given config."""
    dims = [config.input_dim, *config.hidden_sizes, len(TAGS)]
    activations = ["relu"] * len(config.hidden_sizes) + ["sigmoid"]
    dropout = [config.dropout_input] + [config.dropout_hidden] * len(config.hidden_sizes)
    return Mlp.build(dims, activations, dropout_rates=dropout, seed=config.seed)


def training_windows(matrices, tag_vectors, config):
    """Stack context windows of all chunks; every window gets its chunk's tags."""
    xs, ys = [], []
    for matrix, tags in zip(matrices, tag_vectors):
        windows = make_context_inputs(
            matrix, config.context, config.noise_frames, stride=config.train_stride
        )
        xs.append(windows)
        ys.append(np.broadcast_to(np.asarray(tags, dtype=np.float64), (len(windows), len(TAGS))))
    if not xs:
        raise DataError("no training chunks supplied")
    return np.concatenate(xs), np.concatenate(ys)


def train_tagger(matrices, tag_vectors, config, model=None):
    """Train the tagger on normalized per-chunk feature matrices.

    Args:
        matrices: normalized FeatureMatrix (or raw arrays) per training chunk.
        tag_vectors: matching 7-dim binary vectors.
        config: TaggerConfig.
        model: optional pre-built network (used to resume or test no-op budgets).

    Returns:
        (model, FitHistory). With ``epochs=0`` the freshly initialized model
        is returned untouched.
    """
    if model is None:
        model = build_tagger(config)
    if config.epochs == 0:
        return model, FitHistory()

    x, y = training_windows(matrices, tag_vectors, config)
    rng = np.random.default_rng(config.seed + 1)

    x_val = y_val = None
    if config.validation_fraction > 0.0 and len(x) >= 10:
        n_val = max(1, int(len(x) * config.validation_fraction))
        order = rng.permutation(len(x))
        val_sel, train_sel = order[:n_val], order[n_val:]
        x_val, y_val = x[val_sel], y[val_sel]
        x, y = x[train_sel], y[train_sel]

    history = fit_mlp(
        model,
        x,
        y,
        kind=config.loss_kind,
        learning_rate=config.learning_rate,
        momentum=config.momentum,
        batch_size=config.batch_size,
        epochs=config.epochs,
        rng=rng,
        x_val=x_val,
        val_targets=y_val,
        patience=config.patience if x_val is not None else None,
    )
    return model, history


def predict_chunk(model, matrix, config, chunk_id=None):
    """Aggregate stride-1 window posteriors into one ChunkScore.

    The per-tag posterior is the arithmetic mean of the sigmoid outputs
    over all context windows ("max" aggregation is available for
    ablation).
    """
    windows = make_context_inputs(
        matrix, config.context, config.noise_frames, stride=config.predict_stride
    )
    if windows.shape[1] != model.input_dim:
        raise ConfigError(
            "window dim %d does not match model input %d"
            % (windows.shape[1], model.input_dim)
        )
    outputs = model.forward(windows)[-1]
    if config.aggregation == "max":
        posteriors = outputs.max(axis=0)
    else:
        posteriors = outputs.mean(axis=0)
    if chunk_id is None:
        chunk_id = getattr(matrix, "chunk_id", "")
    return ChunkScore(chunk_id=chunk_id, posteriors=posteriors)


def decide_tags(score, threshold=0.4):
    """Tags whose posterior strictly exceeds the threshold."""
    present = [tag for tag, p in zip(TAGS, score.posteriors) if p > threshold]
    return TagSet(frozenset(present))
