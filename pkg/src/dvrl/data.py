"""The :class:`Dataset` container shared by every other module."""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

TaskKind = Literal["classification", "regression"]
SplitRole = Literal["train", "validation", "test"]


def one_hot(labels, n_classes: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    if labels.size and (labels.min() < 0 or labels.max() >= n_classes):
        raise ValueError(f"labels outside [0, {n_classes})")
    out = np.zeros((labels.size, n_classes))
    out[np.arange(labels.size), labels] = 1.0
    return out


@dataclass(frozen=True)
class Dataset:
    """Features, labels and per-row metadata for one split.

    ``labels`` is one-hot ``(N, c)`` for classification and ``(N, 1)`` for
    regression. ``index`` records each row's position in the split it was
    loaded from, so subsets can be traced back; ``flags`` marks corrupted rows
    and ``domains`` carries an optional domain tag.
    """

    features: np.ndarray
    labels: np.ndarray
    task: TaskKind = "classification"
    role: SplitRole = "train"
    flags: np.ndarray | None = None
    domains: np.ndarray | None = None
    index: np.ndarray | None = None

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.float64)
        if y.ndim == 1:
            y = y[:, None]
        if x.ndim != 2:
            raise ValueError(f"features must be 2-d, got shape {x.shape}")
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"{x.shape[0]} feature rows but {y.shape[0]} label rows")
        if self.task not in ("classification", "regression"):
            raise ValueError(f"unknown task kind {self.task!r}")
        if self.role not in ("train", "validation", "test"):
            raise ValueError(f"unknown split role {self.role!r}")
        if self.task == "classification" and y.size:
            ok = np.all((y == 0) | (y == 1)) and np.all(y.sum(axis=1) == 1)
            if not ok:
                raise ValueError("classification labels must be one-hot rows")
        if self.task == "regression" and y.shape[1] != 1:
            raise ValueError("regression labels must be a single column")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)
        n = x.shape[0]
        for name in ("flags", "domains", "index"):
            val = getattr(self, name)
            if val is None:
                continue
            val = np.asarray(val)
            if val.shape != (n,):
                raise ValueError(f"{name} must cover all {n} rows, got shape {val.shape}")
            object.__setattr__(self, name, val)
        if self.flags is not None:
            object.__setattr__(self, "flags", self.flags.astype(bool))
        if self.index is None:
            object.__setattr__(self, "index", np.arange(n))

    @classmethod
    def from_labels(cls, features, labels, n_classes: int | None = None, **kwargs) -> "Dataset":
        """Build a classification dataset from integer class labels."""
        labels = np.asarray(labels, dtype=np.int64)
        if n_classes is None:
            n_classes = int(labels.max()) + 1 if labels.size else 2
        return cls(features, one_hot(labels, n_classes), task="classification", **kwargs)

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.labels.shape[1]

    @property
    def class_labels(self) -> np.ndarray:
        if self.task != "classification":
            raise ValueError("class labels only exist for classification data")
        return np.argmax(self.labels, axis=1)

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows)
        if rows.dtype == bool:
            rows = np.flatnonzero(rows)
        rows = rows.astype(np.int64)
        pick = lambda a: None if a is None else a[rows]
        return replace(
            self,
            features=self.features[rows],
            labels=self.labels[rows],
            flags=pick(self.flags),
            domains=pick(self.domains),
            index=self.index[rows],
        )

    def with_role(self, role: SplitRole) -> "Dataset":
        return replace(self, role=role)

    def with_labels(self, labels, flags=None) -> "Dataset":
        return replace(self, labels=labels, flags=flags if flags is not None else self.flags)

    def schema_matches(self, other: "Dataset") -> bool:
        return (
            self.task == other.task
            and self.n_features == other.n_features
            and self.n_outputs == other.n_outputs
        )
