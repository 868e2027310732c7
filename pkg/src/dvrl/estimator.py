"""Data value estimator: a sigmoid-output MLP over (features, label) pairs.

Its outputs are per-sample selection probabilities. A selection vector is
drawn as independent Bernoulli bits, and the estimator is trained through
the score function of that product distribution.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .data import Dataset
from .nn import (
    MlpParams,
    OptimizerState,
    ShapeError,
    forward_trace,
    init_mlp,
    mlp_backward,
)

SELECTION_EPS = 1e-6


@dataclass
class ValueEstimator:
    params: MlpParams
    n_features: int
    n_label_dims: int
    optimizer: OptimizerState
    eps: float = SELECTION_EPS

    @property
    def input_dim(self) -> int:
        return self.n_features + self.n_label_dims


def make_estimator(
    n_features: int,
    n_label_dims: int,
    *,
    hidden: Sequence[int] = (100, 100),
    lr: float = 0.01,
    optimizer: str = "adam",
    eps: float = SELECTION_EPS,
    seed: int | np.random.Generator | None = 0,
) -> ValueEstimator:
    """Estimator taking ``n_features + n_label_dims`` inputs.

    ``n_label_dims`` is the number of classes (one-hot label appended) or 1
    for regression targets. The output layer starts at zero, so every
    sample begins with selection probability exactly 0.5.
    """
    sizes = (n_features + n_label_dims, *hidden, 1)
    params = init_mlp(sizes, "sigmoid", seed)
    params.weights[-1][...] = 0.0
    return ValueEstimator(params, n_features, n_label_dims, OptimizerState(optimizer, lr), eps)


def encode(est: ValueEstimator, batch: Dataset) -> np.ndarray:
    if batch.n_features != est.n_features or batch.n_outputs != est.n_label_dims:
        raise ShapeError(
            f"estimator expects {est.n_features} features + {est.n_label_dims} label dims, "
            f"batch has {batch.n_features} + {batch.n_outputs}"
        )
    return np.hstack([batch.features, batch.labels])


def _clamp(w: np.ndarray, eps: float) -> np.ndarray:
    return np.clip(w, eps, 1.0 - eps)


def estimate_values(est: ValueEstimator, batch: Dataset) -> np.ndarray:
    """Clamped selection probabilities, one per row of ``batch``."""
    if len(batch) < 1:
        raise ValueError("cannot value an empty batch")
    acts, _ = forward_trace(est.params, encode(est, batch))
    return _clamp(acts[-1][:, 0], est.eps)


def sample_selection(w, rng: int | np.random.Generator | None = None) -> np.ndarray:
    """Independent Bernoulli(w_i) bits as an int8 vector."""
    w = np.asarray(w, dtype=np.float64).ravel()
    if np.any(w < 0) or np.any(w > 1):
        raise ValueError("selection probabilities must lie in [0, 1]")
    rng = np.random.default_rng(rng)
    return (rng.random(w.size) < w).astype(np.int8)


def selection_log_prob(w, s, eps: float = SELECTION_EPS) -> float:
    """``sum_i s_i log w_i + (1 - s_i) log(1 - w_i)`` with w clamped to [eps, 1-eps]."""
    w = np.asarray(w, dtype=np.float64).ravel()
    s = np.asarray(s, dtype=np.float64).ravel()
    if w.shape != s.shape:
        raise ShapeError(f"{w.size} probabilities for {s.size} selection bits")
    w = _clamp(w, eps)
    return float(np.sum(s * np.log(w) + (1.0 - s) * np.log1p(-w)))


def log_prob_gradient(est: ValueEstimator, batch: Dataset, s) -> MlpParams:
    """Gradient of :func:`selection_log_prob` w.r.t. the estimator parameters.

    Per sample, d/dz [s log σ(z) + (1-s) log(1-σ(z))] = s - σ(z); the clamped
    probability is used so saturated units still receive a signal.
    """
    x = encode(est, batch)
    s = np.asarray(s, dtype=np.float64).ravel()
    if s.shape != (len(batch),):
        raise ShapeError(f"{s.size} selection bits for a batch of {len(batch)}")
    trace = forward_trace(est.params, x)
    w = _clamp(trace[0][-1][:, 0], est.eps)
    return mlp_backward(est.params, x, (s - w)[:, None], wrt="logits", trace=trace)
