"""Linear SVM baselines: frame bags (multiple-instance) and chunk statistics.

The solver minimizes ``0.5 * ||w||^2 + A * sum_i hinge(y_i * (w.x_i + b))``
by deterministic epoch-ordered subgradient descent with a decaying step
size and tail-averaged iterates; exactness is traded for reproducibility
and the test suite pins the objective against a convex reference.

The multiple-instance trainer follows the classic two-step scheme: positive
bags start from their centroids, then alternate between fitting the SVM on
the current positive representatives plus all negative instances and
re-selecting each positive representative as the bag's highest-margin
instance, until the selection stops changing.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import DataError


@dataclass
class LinearSvmModel:
    weights: np.ndarray
    bias: float
    reg_a: float
    objective: float = np.nan
    converged: bool = True

    def decision(self, x):
        """Signed margin(s) w.x + b."""
        x = np.asarray(x, dtype=np.float64)
        return x @ self.weights + self.bias


def hinge_objective(weights, bias, x, y, reg_a):
    """0.5 ||w||^2 + A * sum of hinge losses."""
    margins = y * (x @ weights + bias)
    return 0.5 * float(weights @ weights) + reg_a * float(np.sum(np.maximum(0.0, 1.0 - margins)))


def linear_svm_fit(x, y, reg_a=1.0, epochs=200, seed=0, learning_rate=None):
    """Fit a linear soft-margin SVM on +-1 labelled instances.

    Per-sample subgradient steps run in a seeded shuffled order each epoch
    with step size decaying as eta0 / (1 + t * eta0); the returned model is
    whichever of the final or tail-averaged iterate has the lower
    objective.
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).ravel()
    if set(np.unique(y)) - {-1.0, 1.0}:
        raise DataError("labels must be -1/+1")
    if len(np.unique(y)) < 2:
        raise DataError("degenerate training set: only one class present")
    n, d = x.shape
    rng = np.random.default_rng(seed)

    # One hinge term sampled per step gives the unbiased subgradient
    # w - A*n*y_i*x_i (margin active); 1/(t + t0) steps suit the
    # strongly convex regularizer, suffix averaging smooths the tail.
    w = np.zeros(d)
    b = 0.0
    w_avg = np.zeros(d)
    b_avg = 0.0
    n_avg = 0
    t = 0
    t0 = 10.0
    tail_start = (epochs // 2) * n
    for _ in range(epochs):
        for i in rng.permutation(n):
            t += 1
            eta = learning_rate if learning_rate is not None else 1.0 / (t + t0)
            active = y[i] * (x[i] @ w + b) < 1.0
            if active:
                pull = reg_a * n * y[i]
                w -= eta * (w - pull * x[i])
                b += eta * pull
            else:
                w -= eta * w
            if t > tail_start:
                w_avg += w
                b_avg += b
                n_avg += 1

    candidates = [(w, b)]
    if n_avg:
        candidates.append((w_avg / n_avg, b_avg / n_avg))
    best = min(candidates, key=lambda wb: hinge_objective(wb[0], wb[1], x, y, reg_a))
    obj = hinge_objective(best[0], best[1], x, y, reg_a)
    return LinearSvmModel(weights=best[0].copy(), bias=float(best[1]), reg_a=reg_a, objective=obj)


@dataclass
class MilBag:
    bag_id: str
    instances: np.ndarray  # (l_i, d)
    label: int  # -1 or +1
    representative_index: int | None = None

    def __post_init__(self):
        self.instances = np.atleast_2d(np.asarray(self.instances, dtype=np.float64))
        if self.label not in (-1, 1):
            raise DataError("bag label must be -1 or +1")

    @property
    def size(self):
        return len(self.instances)

    @property
    def centroid(self):
        return self.instances.mean(axis=0)


def misvm_train(bags, reg_a=1.0, max_outer_iters=20, svm_epochs=200, seed=0):
    """Two-step multiple-instance SVM over bags of instances.

    Returns (model, info) where info records the outer iteration count,
    convergence flag, final representative indices per positive bag and the
    bag-level objective history.
    """
    positives = [b for b in bags if b.label == 1]
    negatives = [b for b in bags if b.label == -1]
    if not positives or not negatives:
        raise DataError("need at least one positive and one negative bag")

    neg_x = np.concatenate([b.instances for b in negatives])
    reps = np.stack([b.centroid for b in positives])
    rep_idx = None
    info = {"n_outer": 0, "converged": False, "objective_history": [],
            "representatives": None}

    model = None
    best_model = None
    best_obj = np.inf
    for outer in range(max_outer_iters):
        train_x = np.concatenate([reps, neg_x])
        train_y = np.concatenate([np.ones(len(reps)), -np.ones(len(neg_x))])
        model = linear_svm_fit(train_x, train_y, reg_a=reg_a, epochs=svm_epochs, seed=seed)
        info["n_outer"] = outer + 1

        obj = bag_objective(model, bags)
        info["objective_history"].append(obj)
        if obj < best_obj:
            best_obj = obj
            best_model = model

        new_idx = np.array(
            [int(np.argmax(model.decision(b.instances))) for b in positives]
        )
        new_reps = np.stack([b.instances[j] for b, j in zip(positives, new_idx)])
        rep_idx = new_idx
        if np.array_equal(new_reps, reps):
            info["converged"] = True
            break
        reps = new_reps

    if not info["converged"]:
        warnings.warn("multiple-instance training hit the outer iteration cap")
        model = best_model
    for b, j in zip(positives, rep_idx):
        b.representative_index = int(j)
    info["representatives"] = {b.bag_id: int(j) for b, j in zip(positives, rep_idx)}
    model.converged = info["converged"]
    return model, info


def bag_objective(model, bags):
    """Bag-margin hinge objective: 0.5||w||^2 + A * sum_i hinge(bag margin)."""
    total = 0.5 * float(model.weights @ model.weights)
    for b in bags:
        gamma = b.label * float(np.max(model.decision(b.instances)))
        total += model.reg_a * max(0.0, 1.0 - gamma)
    return total


def bag_score(model, instances):
    """Ranking score of a bag: the maximum instance margin."""
    return float(np.max(model.decision(instances)))


def chunk_svm_features(matrix):
    """Chunk-level vector: per-dim mean plus the upper triangle of the
    population covariance (diagonal included).

    For 24-dim inputs this yields 24 + 300 = 324 values. A single-frame
    chunk degenerates to a zero covariance with a warning.
    """
    values = np.atleast_2d(np.asarray(getattr(matrix, "values", matrix), dtype=np.float64))
    n, d = values.shape
    if n < 1:
        raise DataError("empty chunk")
    mean = values.mean(axis=0)
    if n == 1:
        warnings.warn("single-frame chunk: covariance is identically zero")
        cov = np.zeros((d, d))
    else:
        centered = values - mean
        cov = centered.T @ centered / n
    iu = np.triu_indices(d)
    return np.concatenate([mean, cov[iu]])
