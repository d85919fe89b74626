"""Multi-label environmental audio tagging toolkit.

Mel-domain features, a shrinking multi-label DNN with dropout and
noise-aware inputs, denoising auto-encoder bottleneck features, GMM and
multiple-instance SVM baselines, and equal-error-rate evaluation over the
5-fold chunk protocol.
"""

from .dataset import (
    TAGS,
    AudioChunk,
    ChunkRecord,
    TagSet,
    load_chunk_list,
    read_wav,
)
from .features import (
    FeatureMatrix,
    NormStats,
    extract_features,
    fit_norm_stats,
    frame_signal,
    make_context_inputs,
    mel_filterbank_features,
    mfcc_features,
)
from .metrics import compute_eer, compute_prf, evaluate_fold, aggregate_folds
from .net import Mlp, gradient_check, loss_and_gradient
from .tagger import TaggerConfig, decide_tags, predict_chunk, train_tagger
from .dae import DaeConfig, encode, decode, encode_corpus, train_dae

__version__ = "0.1.0"

__all__ = [
    "TAGS",
    "AudioChunk",
    "ChunkRecord",
    "TagSet",
    "load_chunk_list",
    "read_wav",
    "FeatureMatrix",
    "NormStats",
    "extract_features",
    "fit_norm_stats",
    "frame_signal",
    "make_context_inputs",
    "mel_filterbank_features",
    "mfcc_features",
    "compute_eer",
    "compute_prf",
    "evaluate_fold",
    "aggregate_folds",
    "Mlp",
    "gradient_check",
    "loss_and_gradient",
    "TaggerConfig",
    "decide_tags",
    "predict_chunk",
    "train_tagger",
    "DaeConfig",
    "encode",
    "decode",
    "encode_corpus",
    "train_dae",
    "__version__",
]
