"""Reference valuation methods: random, leave-one-out and Data Shapley.

All of them score subsets through an evaluator, any callable
``evaluator(data, rows) -> float`` returning a performance where higher is
better. :class:`MarginalEvaluator` is the standard one: it trains a fresh
predictor on the subset and scores it on a held-out set.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Callable, Protocol

import numpy as np

from .data import Dataset
from .predictor import PredictorModel, evaluate, fit, score_predictions

MAX_EXACT_SHAPLEY = 12


class Evaluator(Protocol):
    def __call__(self, data: Dataset, rows: np.ndarray) -> float: ...


@dataclass
class MarginalEvaluator:
    """Performance of a freshly initialised predictor trained on a subset.

    ``factory(seed)`` must return an untrained model; every call reuses
    ``seed`` so score differences come from the data alone. Loss metrics are
    negated so that larger is always better. The empty subset scores as the
    majority class of ``validation`` (classification) or the constant mean
    of its targets (regression).
    """

    factory: Callable[[int], PredictorModel]
    validation: Dataset
    metric: str = "accuracy"
    seed: int = 0
    iterations: int | None = None
    batch_size: int | None = None

    def with_seed(self, seed: int) -> "MarginalEvaluator":
        return MarginalEvaluator(
            self.factory, self.validation, self.metric, seed, self.iterations, self.batch_size
        )

    def _sign(self) -> float:
        return 1.0 if self.metric == "accuracy" else -1.0

    def empty_score(self) -> float:
        v = self.validation
        if v.task == "classification":
            counts = v.labels.sum(axis=0)
            pred = np.zeros_like(v.labels)
            pred[:, int(np.argmax(counts))] = 1.0
        else:
            pred = np.full_like(v.labels, v.labels.mean())
        return self._sign() * score_predictions(pred, v, self.metric)

    def __call__(self, data: Dataset, rows) -> float:
        rows = np.asarray(rows, dtype=np.int64)
        if rows.size == 0:
            return self.empty_score()
        model = self.factory(self.seed)
        fit(model, data.subset(rows).with_role("train"), self.iterations, self.batch_size, self.seed)
        return self._sign() * evaluate(model, self.validation, self.metric)


def random_values(n: int, seed: int | np.random.Generator | None = 0) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.random.default_rng(seed).uniform(0.0, 1.0, size=n)


def loo_values(data: Dataset, evaluator: Evaluator) -> np.ndarray:
    """``perf(all) - perf(all but i)`` for every row.

    A failed retrain leaves NaN in that row and raises a warning; the other
    rows are unaffected.
    """
    n = len(data)
    if n < 2:
        raise ValueError("leave-one-out needs at least two rows")
    everything = np.arange(n)
    full = evaluator(data, everything)
    values = np.empty(n)
    failed = []
    for i in range(n):
        try:
            values[i] = full - evaluator(data, np.delete(everything, i))
        except Exception as exc:  # noqa: BLE001 - isolate per-sample failures
            values[i] = np.nan
            failed.append((i, repr(exc)))
    if failed:
        warnings.warn(f"leave-one-out failed for rows {failed}", RuntimeWarning, stacklevel=2)
    return values


def shapley_exact(data: Dataset, evaluator: Evaluator) -> np.ndarray:
    """Exact Shapley values by scoring all ``2**n`` subsets."""
    n = len(data)
    if n > MAX_EXACT_SHAPLEY:
        raise ValueError(
            f"exact Shapley over {n} rows needs 2**{n} retrains; use shapley_tmc instead"
        )
    scores = {}
    for mask in range(1 << n):
        rows = np.array([i for i in range(n) if mask >> i & 1], dtype=np.int64)
        scores[mask] = evaluator(data, rows)
    fact = [math.factorial(k) for k in range(n + 1)]
    values = np.zeros(n)
    for i in range(n):
        bit = 1 << i
        for mask in range(1 << n):
            if mask & bit:
                continue
            size = bin(mask).count("1")
            weight = fact[size] * fact[n - size - 1] / fact[n]
            values[i] += weight * (scores[mask | bit] - scores[mask])
    return values


def shapley_tmc(
    data: Dataset,
    evaluator: Evaluator,
    permutations: int = 100,
    tolerance: float | None = None,
    seed: int | np.random.Generator | None = 0,
) -> np.ndarray:
    """Truncated Monte Carlo Shapley.

    Averages marginal contributions along random permutations. Once the
    running score is within ``tolerance`` of the full-data score, the rest of
    the permutation is credited zero without retraining. The default
    tolerance is ``0.001 * |perf(all)|``; ``tolerance=0`` never truncates.
    """
    if permutations < 1:
        raise ValueError("permutations must be >= 1")
    n = len(data)
    rng = np.random.default_rng(seed)
    full = evaluator(data, np.arange(n))
    empty = evaluator(data, np.array([], dtype=np.int64))
    if tolerance is None:
        tolerance = 1e-3 * abs(full)
    cache: dict[frozenset, float] = {}
    total = np.zeros(n)
    for _ in range(permutations):
        perm = rng.permutation(n)
        prev = empty
        for j in range(n):
            if abs(full - prev) < tolerance:
                break
            key = frozenset(perm[: j + 1].tolist())
            if key not in cache:
                cache[key] = evaluator(data, np.sort(perm[: j + 1]))
            cur = cache[key]
            total[perm[j]] += cur - prev
            prev = cur
    return total / permutations

