"""Evaluation protocols: noise injection, removal and discovery curves,
robust learning, domain adaptation and validation-size sweeps."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Sequence

import numpy as np

from .baselines import MarginalEvaluator
from .data import Dataset, one_hot
from .engine import DvrlConfig, ValuationResult, new_predictor, train_dvrl
from .predictor import PredictorModel, evaluate, fit

DISCOVERY_GRID = tuple(round(0.05 * k, 2) for k in range(1, 11))
REMOVAL_GRID = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5)


@dataclass(frozen=True)
class CorruptionSpec:
    kind: Literal["label-flip", "gaussian-feature"] = "label-flip"
    ratio: float = 0.2
    sigma: float = 0.0
    seed: int = 0


@dataclass(frozen=True)
class CurvePoint:
    fraction: float
    value: float
    end: str | None = None
    skipped: bool = False

    def to_dict(self) -> dict:
        out = {"fraction": self.fraction, "value": None if self.skipped else self.value}
        if self.end is not None:
            out["end"] = self.end
        if self.skipped:
            out["skipped"] = True
        return out


def corrupt_labels(data: Dataset, spec: CorruptionSpec) -> Dataset:
    """Move exactly ``floor(ratio * N)`` labels to a different, uniformly
    chosen class and flag those rows."""
    if data.task != "classification":
        raise ValueError("label corruption needs a classification task")
    c = data.n_outputs
    if c < 2:
        raise ValueError("label corruption needs at least two classes")
    if not 0.0 <= spec.ratio <= 1.0:
        raise ValueError(f"ratio must lie in [0, 1], got {spec.ratio}")
    n = len(data)
    k = int(np.floor(spec.ratio * n + 1e-9))
    rng = np.random.default_rng(spec.seed)
    rows = rng.choice(n, size=k, replace=False)
    y = data.class_labels.copy()
    # shifting by 1..c-1 (mod c) picks uniformly among the other classes
    y[rows] = (y[rows] + rng.integers(1, c, size=k)) % c
    flags = np.zeros(n, dtype=bool)
    flags[rows] = True
    return data.with_labels(one_hot(y, c), flags)


def corrupt_features(data: Dataset, spec: CorruptionSpec) -> Dataset:
    """Add i.i.d. N(0, sigma^2) noise to every feature of a training split."""
    if data.role != "train":
        raise ValueError(f"only training data is corrupted, got the {data.role} split")
    if not spec.sigma > 0:
        raise ValueError(f"sigma must be > 0, got {spec.sigma}")
    rng = np.random.default_rng(spec.seed)
    noisy = data.features + rng.normal(0.0, spec.sigma, size=data.features.shape)
    return Dataset(noisy, data.labels, data.task, data.role, data.flags, data.domains, data.index)


def rank_ascending(values) -> np.ndarray:
    """Row order by increasing value, ties by increasing row index."""
    values = np.asarray(values, dtype=np.float64)
    return np.lexsort((np.arange(values.size), values))


def rank_descending(values) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return np.lexsort((np.arange(values.size), -values))


def _count(fraction: float, n: int) -> int:
    return int(round(fraction * n))


def discovery_curve(values, flags, fractions: Sequence[float] = DISCOVERY_GRID) -> list[CurvePoint]:
    """Share of flagged rows found when inspecting the lowest-valued rows."""
    values = np.asarray(values, dtype=np.float64)
    flags = np.asarray(flags, dtype=bool)
    if values.shape != flags.shape:
        raise ValueError(f"{values.size} values but {flags.size} flags")
    total = int(flags.sum())
    if total == 0:
        raise ValueError("no corrupted rows, so the discovery curve is undefined")
    _check_increasing(fractions, 0.0, 1.0)
    found = np.cumsum(flags[rank_ascending(values)])
    out = []
    for f in fractions:
        k = _count(f, values.size)
        out.append(CurvePoint(float(f), float(found[k - 1]) / total if k else 0.0))
    return out


def _check_increasing(fractions, lo, hi):
    fr = np.asarray(fractions, dtype=np.float64)
    if fr.size == 0 or np.any(np.diff(fr) <= 0) or fr[0] < lo or fr[-1] > hi:
        raise ValueError(f"fractions must be strictly increasing within [{lo}, {hi}]")


def removal_curve(
    values,
    data: Dataset,
    end: Literal["most", "least"],
    fractions: Sequence[float],
    evaluator,
) -> list[CurvePoint]:
    """Retrain after dropping the highest (``most``) or lowest (``least``)
    valued fraction of rows and record the evaluator's score.

    With a :class:`MarginalEvaluator`, the point that removes ``k`` rows is
    trained with seed ``evaluator.seed + k``, so fraction 0 reproduces the
    evaluator's own full-data score and both ends share seeds.
    """
    values = np.asarray(values, dtype=np.float64)
    if values.shape != (len(data),):
        raise ValueError(f"{values.size} values for {len(data)} rows")
    if end not in ("most", "least"):
        raise ValueError(f"end must be 'most' or 'least', got {end!r}")
    _check_increasing(fractions, 0.0, 0.9)
    order = rank_descending(values) if end == "most" else rank_ascending(values)
    n = len(data)
    out = []
    for f in fractions:
        k = _count(f, n)
        keep = np.sort(order[k:])
        if keep.size == 0:
            out.append(CurvePoint(float(f), float("nan"), end, skipped=True))
            continue
        ev = evaluator.with_seed(evaluator.seed + k) if isinstance(evaluator, MarginalEvaluator) else evaluator
        out.append(CurvePoint(float(f), float(ev(data, keep)), end))
    return out


def _plain_model(config: DvrlConfig, train: Dataset, seed_offset: int) -> PredictorModel:
    rng = np.random.default_rng([config.seed, seed_offset])
    model = new_predictor(config, train, rng)
    iters = config.final_iterations or config.pretrain_iterations or config.inner_iterations
    return fit(model, train.with_role("train"), iters, config.predictor_batch, rng)


def robust_learning_eval(
    train: Dataset,
    validation: Dataset,
    test: Dataset,
    config: DvrlConfig,
    metric: str = "accuracy",
) -> dict:
    """Test metric of the DVRL predictor next to three reference predictors:
    all noisy data, clean rows only, and the validation set only."""
    if train.flags is None:
        raise ValueError("robust learning needs corruption flags on the training split")
    result = train_dvrl(train, validation, config)
    clean = train.subset(~train.flags)
    return {
        "dvrl": evaluate(result.predictor, test, metric),
        "baseline": evaluate(_plain_model(config, train, 1), test, metric),
        "clean_only": evaluate(_plain_model(config, clean, 2), test, metric),
        "validation_only": evaluate(_plain_model(config, validation, 3), test, metric),
        "result": result,
    }


def domain_adaptation_eval(
    source: Dataset,
    target_validation: Dataset,
    target_test: Dataset,
    config: DvrlConfig,
    metric: str = "accuracy",
) -> dict:
    """Value source rows against a target-domain validation set and compare
    the DVRL predictor with naive training on the whole source."""
    for other in (target_validation, target_test):
        if not source.schema_matches(other):
            raise ValueError("source and target splits do not share a feature schema")
    result = train_dvrl(source, target_validation, config)
    report = {
        "dvrl": evaluate(result.predictor, target_test, metric),
        "baseline": evaluate(_plain_model(config, source, 1), target_test, metric),
        "result": result,
    }
    if source.domains is not None:
        report["mean_value_by_domain"] = {
            str(d): float(result.values[source.domains == d].mean())
            for d in np.unique(source.domains)
        }
    return report


def validation_size_sweep(
    train: Dataset,
    validation_pool: Dataset,
    sizes: Sequence[int],
    config: DvrlConfig,
    fractions: Sequence[float] = DISCOVERY_GRID,
) -> dict[int, tuple[list[CurvePoint], ValuationResult]]:
    """Discovery curve for DVRL trained against validation subsets of each size.

    Subsets are drawn without replacement with ``config.seed`` and keep pool
    order, so the full-pool size reproduces a plain run.
    """
    if train.flags is None:
        raise ValueError("the sweep needs corruption flags on the training split")
    out = {}
    for size in sizes:
        size = int(size)
        if size < 1:
            raise ValueError("validation size must be >= 1")
        if size > len(validation_pool):
            raise ValueError(f"size {size} exceeds the pool of {len(validation_pool)}")
        rng = np.random.default_rng([config.seed, size])
        rows = np.sort(rng.choice(len(validation_pool), size=size, replace=False))
        result = train_dvrl(train, validation_pool.subset(rows), config)
        out[size] = (discovery_curve(result.values, train.flags, fractions), result)
    return out
