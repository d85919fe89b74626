"""Per-tag binary GMM classifier trained by EM.

For each tag a positive mixture is fitted on all frames of chunks carrying
the tag and a negative mixture on the remaining frames. A chunk's score
for the tag is the summed per-frame log-likelihood ratio between the two
mixtures.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from ..dataset import TAGS
from ..errors import DataError

VAR_FLOOR = 1e-6


@dataclass
class DiagonalGmm:
    """Mixture of axis-aligned Gaussians: simplex weights, floored variances."""

    weights: np.ndarray  # (M,)
    means: np.ndarray  # (M, d)
    variances: np.ndarray  # (M, d)

    @property
    def n_components(self):
        return len(self.weights)

    def component_log_prob(self, x):
        """log of weight_m * N(x | mean_m, diag var_m), shape (n, M)."""
        x = np.atleast_2d(np.asarray(x, dtype=np.float64))
        diff = x[:, None, :] - self.means[None, :, :]
        quad = np.sum(diff * diff / self.variances[None, :, :], axis=2)
        log_det = np.sum(np.log(self.variances), axis=1)
        d = x.shape[1]
        log_norm = -0.5 * (d * np.log(2.0 * np.pi) + log_det)
        return np.log(self.weights)[None, :] + log_norm[None, :] - 0.5 * quad

    def log_prob(self, x):
        """Per-sample mixture log-density, shape (n,)."""
        return logsumexp(self.component_log_prob(x), axis=1)


def _kmeans_plus_plus(x, k, rng):
    """k-means++ seeding followed by a few Lloyd refinement sweeps."""
    n = len(x)
    centers = np.empty((k, x.shape[1]))
    centers[0] = x[rng.integers(n)]
    closest = np.sum((x - centers[0]) ** 2, axis=1)
    for i in range(1, k):
        probs = closest / closest.sum() if closest.sum() > 0 else np.full(n, 1.0 / n)
        centers[i] = x[rng.choice(n, p=probs)]
        closest = np.minimum(closest, np.sum((x - centers[i]) ** 2, axis=1))

    assign = None
    for _ in range(10):
        dists = ((x[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = dists.argmin(axis=1)
        if assign is not None and np.array_equal(new_assign, assign):
            break
        assign = new_assign
        for i in range(k):
            members = x[assign == i]
            if len(members):
                centers[i] = members.mean(axis=0)
    return centers, assign


def _init_from_kmeans(x, n_components, rng):
    centers, assign = _kmeans_plus_plus(x, n_components, rng)
    n, d = x.shape
    weights = np.empty(n_components)
    variances = np.empty((n_components, d))
    global_var = np.maximum(x.var(axis=0), VAR_FLOOR)
    for i in range(n_components):
        members = x[assign == i]
        weights[i] = max(len(members), 1) / n
        if len(members) >= 2:
            variances[i] = np.maximum(members.var(axis=0), VAR_FLOOR)
        else:
            variances[i] = global_var
    weights /= weights.sum()
    return DiagonalGmm(weights=weights, means=centers, variances=variances)


def em_fit(x, n_components=8, n_iters=20, seed=0, var_floor=VAR_FLOOR):
    """Fit a diagonal GMM by EM from a k-means++ start.

    Returns (model, log_likelihood_history); the history holds the total
    data log-likelihood before each parameter update, which is
    non-decreasing up to numerical slack. ``n_iters=0`` returns the
    k-means initialization untouched.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    n, _ = x.shape
    if n < n_components:
        raise DataError(
            "EM needs at least as many frames (%d) as components (%d)" % (n, n_components)
        )
    rng = np.random.default_rng(seed)
    model = _init_from_kmeans(x, n_components, rng)
    history = []
    for _ in range(n_iters):
        joint = model.component_log_prob(x)  # (n, M)
        total = logsumexp(joint, axis=1)
        history.append(float(total.sum()))
        resp = np.exp(joint - total[:, None])

        counts = resp.sum(axis=0)  # (M,)
        collapsed = counts < 1e-10
        if np.any(collapsed):
            warnings.warn("re-normalizing %d collapsed components" % int(collapsed.sum()))
            counts = np.maximum(counts, 1e-10)
        weights = counts / counts.sum()
        means = (resp.T @ x) / counts[:, None]
        sq = (resp.T @ (x * x)) / counts[:, None]
        variances = np.maximum(sq - means * means, var_floor)
        model = DiagonalGmm(weights=weights, means=means, variances=variances)
    history.append(float(model.log_prob(x).sum()))
    return model, history


def gmm_tag_score(positive, negative, frames):
    """Summed per-frame log-likelihood ratio of a chunk's frames."""
    frames = np.atleast_2d(np.asarray(frames, dtype=np.float64))
    return float(positive.log_prob(frames).sum() - negative.log_prob(frames).sum())


def fit_tag_models(matrices, tag_vectors, n_components=8, n_iters=20, seed=0):
    """Fit per-tag positive/negative mixtures over chunk frame matrices.

    ``matrices`` are per-chunk frame arrays, ``tag_vectors`` the matching
    7-dim binary labels. Returns {tag: (positive, negative)}.
    """
    values = [np.asarray(getattr(m, "values", m), dtype=np.float64) for m in matrices]
    labels = np.atleast_2d(np.asarray(tag_vectors, dtype=np.float64))
    models = {}
    for k, tag in enumerate(TAGS):
        pos = [v for v, lab in zip(values, labels) if lab[k] > 0.5]
        neg = [v for v, lab in zip(values, labels) if lab[k] <= 0.5]
        if not pos or not neg:
            raise DataError("tag %r lacks positive or negative training chunks" % tag)
        pos_model, _ = em_fit(np.concatenate(pos), n_components, n_iters, seed=seed)
        neg_model, _ = em_fit(np.concatenate(neg), n_components, n_iters, seed=seed + 1)
        models[tag] = (pos_model, neg_model)
    return models


def score_chunks(models, matrices):
    """Per-chunk, per-tag log-likelihood-ratio scores, shape (n_chunks, 7)."""
    scores = np.zeros((len(matrices), len(TAGS)))
    for i, m in enumerate(matrices):
        frames = np.asarray(getattr(m, "values", m), dtype=np.float64)
        for k, tag in enumerate(TAGS):
            pos, neg = models[tag]
            scores[i, k] = gmm_tag_score(pos, neg, frames)
    return scores
