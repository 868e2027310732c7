"""Joint training of the predictor and the data value estimator.

One outer iteration:

1. draw a valuation batch of ``estimator_batch`` training rows;
2. compute selection probabilities and sample a selection vector;
3. run ``inner_iterations`` predictor steps on the selection-weighted loss;
4. move the estimator by ``-lr_estimator * (val_loss - delta) * grad log pi``;
5. fold the validation loss into the moving-average baseline ``delta``.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Literal

import numpy as np

from .data import Dataset
from .estimator import (
    ValueEstimator,
    estimate_values,
    log_prob_gradient,
    make_estimator,
    sample_selection,
)
from .nn import MlpParams, NonFiniteError, loss_eval, optimizer_step
from .predictor import PredictorModel, fit, fit_weighted, make_predictor, predict

log = logging.getLogger(__name__)

InitMode = Literal["warm", "continue", "cold"]


@dataclass
class DvrlConfig:
    """Hyperparameters for :func:`train_dvrl`.

    ``init_mode`` controls the predictor at the start of each outer
    iteration: ``warm`` restores the weights pre-trained on the whole
    training set, ``continue`` keeps training one predictor throughout, and
    ``cold`` draws a fresh random initialisation. ``lr_estimator=0`` freezes
    the estimator.
    """

    outer_iterations: int = 1000
    inner_iterations: int = 200
    predictor_batch: int = 256
    estimator_batch: int = 2000
    window: int = 20
    lr_predictor: float = 0.001
    lr_estimator: float = 0.01
    init_mode: InitMode = "warm"
    pretrain_iterations: int = 2000
    final_iterations: int | None = None
    predictor: str = "logistic"
    predictor_hidden: tuple[int, ...] = (64,)
    estimator_hidden: tuple[int, ...] = (100, 100)
    optimizer: str = "adam"
    estimator_optimizer: str | None = None
    plateau_patience: int | None = None
    seed: int = 0

    def __post_init__(self):
        self.predictor_hidden = tuple(int(h) for h in self.predictor_hidden)
        self.estimator_hidden = tuple(int(h) for h in self.estimator_hidden)
        problems = self.problems()
        if problems:
            raise ValueError("; ".join(f"{k}: {v}" for k, v in problems.items()))

    def problems(self) -> dict[str, str]:
        out = {}
        if self.outer_iterations < 0:
            out["outer_iterations"] = "must be >= 0"
        if self.inner_iterations < 1:
            out["inner_iterations"] = "must be >= 1"
        if self.predictor_batch < 1:
            out["predictor_batch"] = "must be >= 1"
        if self.estimator_batch < self.predictor_batch:
            out["estimator_batch"] = "must be >= predictor_batch"
        if self.window < 1:
            out["window"] = "must be >= 1"
        if not self.lr_predictor > 0:
            out["lr_predictor"] = "must be > 0"
        if not self.lr_estimator >= 0:
            out["lr_estimator"] = "must be >= 0"
        if self.init_mode not in ("warm", "continue", "cold"):
            out["init_mode"] = "must be warm, continue or cold"
        if self.pretrain_iterations < 0:
            out["pretrain_iterations"] = "must be >= 0"
        if self.optimizer not in ("adam", "sgd"):
            out["optimizer"] = "must be adam or sgd"
        if self.estimator_optimizer not in (None, "adam", "sgd"):
            out["estimator_optimizer"] = "must be adam or sgd"
        if self.predictor not in ("logistic", "mlp"):
            out["predictor"] = "must be logistic or mlp"
        return out

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def desk_scale(cls, **overrides) -> "DvrlConfig":
        """Settings for small tabular problems (about 10^3 rows, 300 outer
        iterations). The defaults above target full-size runs."""
        base = dict(
            outer_iterations=300,
            inner_iterations=50,
            predictor_batch=64,
            estimator_batch=256,
            window=5,
            lr_predictor=0.01,
            lr_estimator=0.001,
            pretrain_iterations=2000,
        )
        base.update(overrides)
        return cls(**base)


@dataclass
class BaselineTracker:
    window: int = 20
    delta: float = 0.0

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("window must be >= 1")


def baseline_update(tracker: BaselineTracker, mean_validation_loss: float) -> BaselineTracker:
    """``delta <- (T-1)/T * delta + loss/T``, in place."""
    if not math.isfinite(mean_validation_loss):
        raise NonFiniteError(f"validation loss is {mean_validation_loss}")
    t = tracker.window
    tracker.delta = (t - 1) / t * tracker.delta + mean_validation_loss / t
    return tracker


def validation_loss(predictor: PredictorModel, validation: Dataset) -> float:
    pred = predict(predictor, validation.features)
    return float(np.mean(loss_eval(predictor.loss_kind, pred, validation.labels)))


def reinforce_gradient(est: ValueEstimator, batch: Dataset, s, loss: float, delta: float) -> MlpParams:
    """Score-function estimate ``(loss - delta) * grad log pi(s)``."""
    grads = log_prob_gradient(est, batch, s)
    advantage = loss - delta
    if not math.isfinite(advantage):
        raise NonFiniteError(f"advantage is {advantage}")
    for a in grads.arrays():
        a *= advantage
    return grads


def reinforce_step(
    est: ValueEstimator,
    batch: Dataset,
    s,
    predictor: PredictorModel,
    validation: Dataset,
    tracker: BaselineTracker,
) -> float:
    """Update ``est`` in place from the current predictor's validation loss.

    Returns the mean validation loss. The baseline is read, not updated.
    """
    loss = validation_loss(predictor, validation)
    grads = reinforce_gradient(est, batch, s, loss, tracker.delta)
    if loss != tracker.delta and est.optimizer.lr > 0:
        optimizer_step(est.optimizer, est.params, grads)
    return loss


@dataclass
class ValuationResult:
    values: np.ndarray
    estimator: ValueEstimator
    predictor: PredictorModel
    trace: list[dict] = field(default_factory=list)
    diverged: bool = False

    @property
    def delta_trace(self) -> np.ndarray:
        return np.array([r["delta"] for r in self.trace])

    @property
    def loss_trace(self) -> np.ndarray:
        return np.array([r["mean_validation_loss"] for r in self.trace])


def new_predictor(config: DvrlConfig, train: Dataset, rng: np.random.Generator) -> PredictorModel:
    if train.task == "regression":
        kind = "mlp_regressor"
    else:
        kind = "logistic" if config.predictor == "logistic" else "mlp_classifier"
    return make_predictor(
        kind,
        train.n_features,
        train.n_outputs,
        hidden=config.predictor_hidden,
        lr=config.lr_predictor,
        optimizer=config.optimizer,
        batch_size=config.predictor_batch,
        iterations=config.inner_iterations,
        seed=rng,
    )


def train_dvrl(train: Dataset, validation: Dataset, config: DvrlConfig) -> ValuationResult:
    """Learn per-sample data values for ``train`` against ``validation``.

    The returned values come from one deterministic estimator pass over the
    full training set. The returned predictor is trained from the start
    weights on the whole training set with the final values as sample weights.
    If the validation loss goes non-finite the loop stops early and the
    result is flagged ``diverged``.
    """
    if not train.schema_matches(validation):
        raise ValueError("train and validation splits do not share a schema")
    if len(validation) == 0:
        raise ValueError("validation set is empty")
    train = train.with_role("train")

    rng = np.random.default_rng(config.seed)
    est = make_estimator(
        train.n_features,
        train.n_outputs,
        hidden=config.estimator_hidden,
        lr=config.lr_estimator if config.lr_estimator > 0 else 1.0,
        optimizer=config.estimator_optimizer or config.optimizer,
        seed=rng,
    )
    if config.lr_estimator == 0:
        est.optimizer.lr = 0.0
    predictor = new_predictor(config, train, rng)
    if config.init_mode != "cold" and config.pretrain_iterations:
        fit(predictor, train, config.pretrain_iterations, config.predictor_batch, rng)
    start = predictor.copy()

    tracker = BaselineTracker(config.window)
    n = len(train)
    b_s = min(config.estimator_batch, n)
    trace: list[dict] = []
    best_delta, since_best = math.inf, 0
    diverged = False
    for it in range(config.outer_iterations):
        rows = np.sort(rng.choice(n, size=b_s, replace=False))
        batch = train.subset(rows)
        w = estimate_values(est, batch)
        s = sample_selection(w, rng)

        if config.init_mode == "warm":
            predictor = start.copy()
        elif config.init_mode == "cold":
            predictor = new_predictor(config, train, rng)
        if s.any():
            fit_weighted(predictor, batch, s, config.inner_iterations, config.predictor_batch, rng)

        try:
            loss = reinforce_step(est, batch, s, predictor, validation, tracker)
            baseline_update(tracker, loss)
        except NonFiniteError as exc:
            log.warning("stopping at outer iteration %d: %s", it, exc)
            diverged = True
            break
        trace.append(
            {
                "iteration": it,
                "mean_validation_loss": loss,
                "delta": tracker.delta,
                "selected_fraction": float(s.mean()),
            }
        )

        if config.plateau_patience is not None and it >= config.window:
            if tracker.delta < best_delta:
                best_delta, since_best = tracker.delta, 0
            else:
                since_best += 1
                if since_best >= config.plateau_patience:
                    log.info("baseline plateaued after %d outer iterations", it + 1)
                    break

    values = estimate_values(est, train)
    final = start.copy()
    final_iters = config.final_iterations
    if final_iters is None:
        final_iters = config.pretrain_iterations or config.inner_iterations
    fit_weighted(final, train, values, final_iters, config.predictor_batch, rng)
    return ValuationResult(values, est, final, trace, diverged)


def infer_values(result: ValuationResult, batch: Dataset) -> np.ndarray:
    """Data values for new samples; the estimator is not modified."""
    return estimate_values(result.estimator, batch)


def infer_predictions(result: ValuationResult, features) -> np.ndarray:
    return predict(result.predictor, features)
