"""Frame-level feature extraction and context-window construction.

Pipeline: 20 ms Hamming frames at a 10 ms hop -> 40 log mel-filterbank
energies (MBK40) or their first 24 DCT-II coefficients (MFCC24) -> per-dim
zero-mean/unit-variance normalization fitted on training folds -> stacked
context windows with a background-noise estimate appended. The noise
estimate is the mean of the chunk's first ``noise_frames`` frames, fixed
across the whole chunk.

A 4-second 16 kHz chunk yields exactly 399 frames.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.fft import dct

from .dataset import SAMPLE_RATE
from .errors import ConfigError, DataError

WINDOW_SAMPLES = 320  # 20 ms at 16 kHz
HOP_SAMPLES = 160  # 10 ms
FFT_SIZE = 512  # next power of two above the window
N_MEL = 40
N_MFCC = 24
LOG_FLOOR = 1e-10
STD_FLOOR = 1e-8

FEATURE_KINDS = ("MBK40", "MFCC24", "DAECODE")


@dataclass
class FeatureMatrix:
    """Frames x dims matrix of one chunk, plus bookkeeping."""

    values: np.ndarray
    kind: str
    chunk_id: str = ""
    frame_period_ms: float = 10.0

    @property
    def n_frames(self):
        return self.values.shape[0]

    @property
    def dim(self):
        return self.values.shape[1]


def frame_count(n_samples, window=WINDOW_SAMPLES, hop=HOP_SAMPLES):
    """Closed-form frame count: 1 + floor((n - window) / hop)."""
    if n_samples < window:
        raise DataError(
            "signal of %d samples is shorter than one %d-sample window"
            % (n_samples, window)
        )
    return 1 + (n_samples - window) // hop


def frame_signal(chunk, window=WINDOW_SAMPLES, hop=HOP_SAMPLES):
    """Slice a chunk into Hamming-tapered frames.

    Returns an (n_frames, window) array.
    """
    samples = np.asarray(chunk.samples, dtype=np.float64)
    n = frame_count(len(samples), window, hop)
    idx = np.arange(window)[None, :] + hop * np.arange(n)[:, None]
    return samples[idx] * np.hamming(window)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_filters=N_MEL, fft_size=FFT_SIZE, sample_rate=SAMPLE_RATE):
    """Triangular unit-peak mel filters over the rfft bins, 0 Hz to Nyquist.

    Returns an (n_filters, fft_size // 2 + 1) weight matrix.
    """
    n_bins = fft_size // 2 + 1
    bin_hz = np.arange(n_bins) * sample_rate / fft_size
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(sample_rate / 2.0), n_filters + 2))
    weights = np.zeros((n_filters, n_bins))
    for i in range(n_filters):
        lo, center, hi = edges_hz[i], edges_hz[i + 1], edges_hz[i + 2]
        rising = (bin_hz - lo) / (center - lo)
        falling = (hi - bin_hz) / (hi - center)
        tri = np.clip(np.minimum(rising, falling), 0.0, 1.0)
        # the analytic peak can fall between bins; renormalize so every
        # filter has unit peak over the sampled grid
        weights[i] = tri / max(tri.max(), 1e-12)
    return weights


_FBANK_CACHE = {}


def _fbank(n_filters, fft_size, sample_rate):
    key = (n_filters, fft_size, sample_rate)
    if key not in _FBANK_CACHE:
        _FBANK_CACHE[key] = mel_filterbank(n_filters, fft_size, sample_rate)
    return _FBANK_CACHE[key]


def mel_filterbank_features(frames, chunk_id="", sample_rate=SAMPLE_RATE):
    """Log mel-filterbank energies (MBK40) for tapered frames.

    The power spectrum of each frame is pooled through the triangular
    filters; energies are floored before the log so silence maps to a
    finite constant.
    """
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    spectrum = np.fft.rfft(frames, n=FFT_SIZE, axis=1)
    power = spectrum.real**2 + spectrum.imag**2
    energies = power @ _fbank(N_MEL, FFT_SIZE, sample_rate).T
    values = np.log(np.maximum(energies, LOG_FLOOR))
    return FeatureMatrix(values=values, kind="MBK40", chunk_id=chunk_id)


def mfcc_features(frames, chunk_id="", sample_rate=SAMPLE_RATE):
    """First 24 DCT-II (orthonormal) coefficients of the 40 log-mel energies."""
    mbk = mel_filterbank_features(frames, chunk_id=chunk_id, sample_rate=sample_rate)
    coeffs = dct(mbk.values, type=2, norm="ortho", axis=1)[:, :N_MFCC]
    return FeatureMatrix(values=coeffs, kind="MFCC24", chunk_id=chunk_id)


def extract_features(chunk, kind="mbk"):
    """Convenience: frame a chunk and extract "mbk" or "mfcc" features."""
    frames = frame_signal(chunk)
    if kind == "mbk":
        return mel_filterbank_features(frames, chunk_id=chunk.chunk_id)
    if kind == "mfcc":
        return mfcc_features(frames, chunk_id=chunk.chunk_id)
    raise ConfigError("unknown feature kind %r (expected 'mbk' or 'mfcc')" % kind)


@dataclass
class NormStats:
    """Per-dimension mean/std fitted on a training corpus. std is floored."""

    mean: np.ndarray
    std: np.ndarray

    def apply(self, matrix):
        if isinstance(matrix, FeatureMatrix):
            return FeatureMatrix(
                values=(matrix.values - self.mean) / self.std,
                kind=matrix.kind,
                chunk_id=matrix.chunk_id,
                frame_period_ms=matrix.frame_period_ms,
            )
        return (np.asarray(matrix) - self.mean) / self.std

    def invert(self, matrix):
        if isinstance(matrix, FeatureMatrix):
            return FeatureMatrix(
                values=matrix.values * self.std + self.mean,
                kind=matrix.kind,
                chunk_id=matrix.chunk_id,
                frame_period_ms=matrix.frame_period_ms,
            )
        return np.asarray(matrix) * self.std + self.mean


def fit_norm_stats(corpus):
    """Fit per-dimension mean and population std over all frames of a corpus.

    Zero-variance dimensions are floored at 1e-8 with a warning, so applying
    the stats never divides by zero.
    """
    stacked = np.concatenate(
        [m.values if isinstance(m, FeatureMatrix) else np.asarray(m) for m in corpus]
    )
    if stacked.size == 0:
        raise DataError("cannot fit normalization stats on an empty corpus")
    mean = stacked.mean(axis=0)
    std = stacked.std(axis=0)
    if np.any(std < STD_FLOOR):
        warnings.warn(
            "flooring %d zero-variance feature dimensions" % int(np.sum(std < STD_FLOOR))
        )
        std = np.maximum(std, STD_FLOOR)
    return NormStats(mean=mean, std=std)


def replicate_pad_window(values, center, half_width):
    """Rows center-half_width .. center+half_width with edge replication."""
    n = values.shape[0]
    idx = np.clip(np.arange(center - half_width, center + half_width + 1), 0, n - 1)
    return values[idx]


def noise_estimate(values, noise_frames):
    """Mean of the first ``noise_frames`` rows; fixed for the whole chunk."""
    if noise_frames < 1:
        raise ConfigError("noise_frames must be >= 1")
    if values.shape[0] < noise_frames:
        raise DataError(
            "chunk has %d frames, fewer than the %d needed for the noise estimate"
            % (values.shape[0], noise_frames)
        )
    return values[:noise_frames].mean(axis=0)


def make_context_inputs(matrix, context=45, noise_frames=6, stride=1):
    """Build stacked context windows with the noise estimate appended.

    For each selected frame position the (2*context+1) neighbouring frames
    (edge-replicated) are flattened in time order and the chunk's noise
    estimate is appended, giving rows of (2*context + 2) * dim values.

    Returns an (n_windows, (2*context + 2) * dim) array, one row per frame
    position at the given stride.
    """
    if context < 0:
        raise ConfigError("context half-width must be >= 0")
    if stride < 1:
        raise ConfigError("stride must be >= 1")
    values = matrix.values if isinstance(matrix, FeatureMatrix) else np.asarray(matrix)
    noise = noise_estimate(values, noise_frames)
    n_frames, dim = values.shape
    centers = np.arange(0, n_frames, stride)
    idx = np.clip(
        centers[:, None] + np.arange(-context, context + 1)[None, :], 0, n_frames - 1
    )
    windows = values[idx].reshape(len(centers), (2 * context + 1) * dim)
    noise_block = np.broadcast_to(noise, (len(centers), dim))
    return np.concatenate([windows, noise_block], axis=1)


def context_input_dim(feature_dim, context):
    """Input width of the classifier: stacked frames plus the noise block."""
    return (2 * context + 2) * feature_dim
