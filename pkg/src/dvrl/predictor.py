"""Target-task predictors trained on sample-weighted losses."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Literal, Sequence

import numpy as np

from .data import Dataset
from .nn import (
    MlpParams,
    OptimizerState,
    ShapeError,
    forward_trace,
    init_mlp,
    loss_eval,
    mlp_backward,
    mlp_forward,
    optimizer_step,
)

PredictorKind = Literal["logistic", "mlp_classifier", "mlp_regressor"]
Metric = Literal["accuracy", "log_loss", "mse", "rmspe"]


class ZeroWeightWarning(RuntimeWarning):
    """All sample weights were zero, so a fit was skipped."""


@dataclass
class PredictorModel:
    kind: PredictorKind
    params: MlpParams
    optimizer: OptimizerState
    batch_size: int = 256
    iterations: int = 200
    hidden: tuple[int, ...] = field(default=())

    @property
    def task(self) -> str:
        return "regression" if self.kind == "mlp_regressor" else "classification"

    @property
    def loss_kind(self) -> str:
        return "mse" if self.task == "regression" else "cross_entropy"

    def copy(self) -> "PredictorModel":
        return PredictorModel(
            self.kind,
            self.params.copy(),
            OptimizerState(
                self.optimizer.kind,
                self.optimizer.lr,
                self.optimizer.beta1,
                self.optimizer.beta2,
                self.optimizer.eps,
            ),
            self.batch_size,
            self.iterations,
            self.hidden,
        )


def make_predictor(
    kind: PredictorKind,
    input_dim: int,
    output_dim: int,
    *,
    hidden: Sequence[int] = (64,),
    lr: float = 1e-3,
    optimizer: Literal["sgd", "adam"] = "adam",
    batch_size: int = 256,
    iterations: int = 200,
    seed: int | np.random.Generator | None = 0,
) -> PredictorModel:
    """Fresh predictor with Glorot-initialised weights.

    ``logistic`` is a softmax layer with no hidden units; ``hidden`` is
    ignored for it.
    """
    if kind == "logistic":
        sizes, out_act, hidden = (input_dim, output_dim), "softmax", ()
    elif kind == "mlp_classifier":
        sizes, out_act = (input_dim, *hidden, output_dim), "softmax"
    elif kind == "mlp_regressor":
        sizes, out_act = (input_dim, *hidden, output_dim), "identity"
    else:
        raise ValueError(f"unknown predictor kind {kind!r}")
    params = init_mlp(sizes, out_act, seed)
    return PredictorModel(
        kind, params, OptimizerState(optimizer, lr), batch_size, iterations, tuple(hidden)
    )


def _check_compatible(model: PredictorModel, data: Dataset) -> None:
    if data.task != model.task:
        raise ValueError(f"{model.kind} predictor cannot fit {data.task} data")
    if data.n_features != model.params.input_dim:
        raise ShapeError(f"model expects {model.params.input_dim} features, data has {data.n_features}")
    if data.n_outputs != model.params.output_dim:
        raise ShapeError(f"model outputs {model.params.output_dim} dims, labels have {data.n_outputs}")


def weighted_gradient(model: PredictorModel, x: np.ndarray, y: np.ndarray, w: np.ndarray, divisor: float) -> MlpParams:
    """Gradient of ``sum_m w_m * loss_m / divisor``."""
    trace = forward_trace(model.params, x)
    out = trace[0][-1]
    if model.task == "classification":
        # softmax + cross-entropy, taken w.r.t. logits
        g = (out - y) * (w / divisor)[:, None]
    else:
        # per-sample MSE is averaged over output columns
        g = 2.0 * (out - y) / y.shape[1] * (w / divisor)[:, None]
    return mlp_backward(model.params, x, g, wrt="logits", trace=trace)


def fit_weighted(
    model: PredictorModel,
    data: Dataset,
    weights,
    iterations: int | None = None,
    batch_size: int | None = None,
    seed: int | np.random.Generator | None = 0,
) -> PredictorModel:
    """Mini-batch training on a weight-scaled loss; updates ``model`` in place.

    Each step samples ``batch_size`` rows without replacement (all rows, in
    order, when the dataset is not larger than the batch) and descends on
    ``sum_m w_m * loss_m / batch_size``. The divisor is always the configured
    batch size, never the realised batch length or the weight sum.
    """
    if data.role != "train":
        raise ValueError(f"refusing to fit on the {data.role} split")
    _check_compatible(model, data)
    w = np.asarray(weights, dtype=np.float64).ravel()
    if w.shape != (len(data),):
        raise ShapeError(f"{w.size} weights for {len(data)} rows")
    if np.any(w < 0) or np.any(w > 1) or not np.all(np.isfinite(w)):
        raise ValueError("weights must lie in [0, 1]")
    iterations = model.iterations if iterations is None else int(iterations)
    batch_size = model.batch_size if batch_size is None else int(batch_size)
    if batch_size < 1 or iterations < 0:
        raise ValueError("batch_size must be >= 1 and iterations >= 0")
    if not np.any(w > 0):
        warnings.warn("all sample weights are zero; predictor left unchanged", ZeroWeightWarning, stacklevel=2)
        return model

    rng = np.random.default_rng(seed)
    n = len(data)
    x_all, y_all = data.features, data.labels
    full_batch = n <= batch_size
    for _ in range(iterations):
        if full_batch:
            x, y, wb = x_all, y_all, w
        else:
            rows = rng.choice(n, size=batch_size, replace=False)
            x, y, wb = x_all[rows], y_all[rows], w[rows]
        grads = weighted_gradient(model, x, y, wb, batch_size)
        optimizer_step(model.optimizer, model.params, grads)
    return model


def fit(model: PredictorModel, data: Dataset, iterations: int | None = None,
        batch_size: int | None = None, seed=0) -> PredictorModel:
    """Unweighted training; identical to :func:`fit_weighted` with unit weights."""
    return fit_weighted(model, data, np.ones(len(data)), iterations, batch_size, seed)


def predict(model: PredictorModel, features) -> np.ndarray:
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.params.input_dim:
        raise ShapeError(f"model expects {model.params.input_dim} features, got shape {x.shape}")
    return mlp_forward(model.params, x)


def rmspe(y_true, y_pred) -> float:
    y_true = np.asarray(y_true, dtype=np.float64).ravel()
    y_pred = np.asarray(y_pred, dtype=np.float64).ravel()
    zero = np.flatnonzero(y_true == 0)
    if zero.size:
        raise ValueError(f"RMSPE undefined for zero targets at rows {zero.tolist()}")
    return float(np.sqrt(np.mean(((y_true - y_pred) / y_true) ** 2)))


def score_predictions(pred: np.ndarray, data: Dataset, metric: Metric) -> float:
    if metric == "accuracy":
        if data.task != "classification":
            raise ValueError("accuracy needs a classification task")
        # np.argmax resolves ties to the lowest class index
        return float(np.mean(np.argmax(pred, axis=1) == data.class_labels))
    if metric == "log_loss":
        if data.task != "classification":
            raise ValueError("log_loss needs a classification task")
        return float(np.mean(loss_eval("cross_entropy", pred, data.labels)))
    if metric == "mse":
        return float(np.mean((pred - data.labels) ** 2))
    if metric == "rmspe":
        if data.task != "regression":
            raise ValueError("rmspe needs a regression task")
        return rmspe(data.labels, pred)
    raise ValueError(f"unknown metric {metric!r}")


def evaluate(model: PredictorModel, data: Dataset, metric: Metric = "accuracy") -> float:
    return score_predictions(predict(model, data.features), data, metric)
