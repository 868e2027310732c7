"""CSV ingestion, train-fitted preprocessing and report/value file writers."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import warnings
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
import pandas as pd

from .data import Dataset, one_hot

log = logging.getLogger(__name__)


class DataError(ValueError):
    """Input data that cannot be ingested as declared."""


@dataclass
class RawTable:
    frame: pd.DataFrame
    label: str
    categorical: list[str]
    path: str = "<memory>"


def load_csv(path, label: str, categorical: Sequence[str] = ()) -> RawTable:
    """Read a headed CSV; categorical columns stay strings, the rest must be numeric."""
    path = str(path)
    frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    if label not in frame.columns:
        raise DataError(f"{path}: label column {label!r} not found (columns: {list(frame.columns)})")
    missing_cats = [c for c in categorical if c not in frame.columns]
    if missing_cats:
        raise DataError(f"{path}: categorical columns {missing_cats} not found")
    for col in frame.columns:
        blank = np.flatnonzero(frame[col].str.strip().eq("").to_numpy())
        if blank.size:
            raise DataError(f"{path}: missing value at row {int(blank[0])}, column {col!r}")
    out = {}
    for col in frame.columns:
        if col in categorical or col == label:
            out[col] = frame[col].str.strip()
            continue
        parsed = pd.to_numeric(frame[col], errors="coerce")
        bad = np.flatnonzero(parsed.isna().to_numpy())
        if bad.size:
            raise DataError(
                f"{path}: cannot parse {frame[col].iloc[bad[0]]!r} as a number "
                f"at row {int(bad[0])}, column {col!r}"
            )
        out[col] = parsed.astype(np.float64)
    return RawTable(pd.DataFrame(out), label, list(categorical), path)


@dataclass
class PreprocessSpec:
    """Train-split statistics: numeric means/stds, categorical vocabularies
    (one-hot order) and the label encoding."""

    task: str
    label: str
    numeric: dict[str, tuple[float, float]] = field(default_factory=dict)
    categorical: dict[str, list[str]] = field(default_factory=dict)
    classes: list[str] | None = None
    dropped: list[str] = field(default_factory=list)
    meta_columns: list[str] = field(default_factory=list)

    @property
    def feature_names(self) -> list[str]:
        names = list(self.numeric)
        for col, vocab in self.categorical.items():
            names.extend(f"{col}={v}" for v in vocab)
        return names


def fit_spec(raw: RawTable, task: str, meta_columns: Sequence[str] = ()) -> PreprocessSpec:
    spec = PreprocessSpec(task, raw.label, meta_columns=list(meta_columns))
    for col in raw.frame.columns:
        if col == raw.label or col in meta_columns:
            continue
        if col in raw.categorical:
            spec.categorical[col] = sorted(raw.frame[col].unique().tolist())
            continue
        values = raw.frame[col].to_numpy(dtype=np.float64)
        std = float(values.std())  # population std
        if std == 0.0:
            warnings.warn(f"dropping constant column {col!r}", RuntimeWarning, stacklevel=2)
            spec.dropped.append(col)
            continue
        spec.numeric[col] = (float(values.mean()), std)
    if not spec.numeric and not spec.categorical:
        raise DataError("no feature columns left after dropping constant columns")
    if task == "classification":
        spec.classes = sorted(raw.frame[raw.label].unique().tolist())
        if len(spec.classes) < 2:
            raise DataError("classification needs at least two label values in the train split")
    elif task != "regression":
        raise DataError(f"unknown task {task!r}")
    return spec


def _apply_features(spec: PreprocessSpec, frame: pd.DataFrame, where: str) -> np.ndarray:
    blocks = []
    for col, (mean, std) in spec.numeric.items():
        if col not in frame.columns:
            raise DataError(f"{where}: column {col!r} missing")
        blocks.append(((frame[col].to_numpy(dtype=np.float64) - mean) / std)[:, None])
    for col, vocab in spec.categorical.items():
        if col not in frame.columns:
            raise DataError(f"{where}: column {col!r} missing")
        values = frame[col].astype(str).to_numpy()
        unseen = sorted(set(values) - set(vocab))
        if unseen:
            raise DataError(f"{where}: column {col!r} has categories unseen in training: {unseen}")
        lookup = {v: i for i, v in enumerate(vocab)}
        blocks.append(one_hot([lookup[v] for v in values], len(vocab)))
    return np.hstack(blocks)


def apply_spec(
    spec: PreprocessSpec,
    raw: RawTable,
    role: str,
    flag_column: str | None = None,
    domain_column: str | None = None,
) -> Dataset:
    frame = raw.frame
    x = _apply_features(spec, frame, raw.path)
    labels = frame[spec.label]
    if spec.task == "classification":
        lookup = {v: i for i, v in enumerate(spec.classes)}
        unseen = sorted(set(labels.astype(str)) - set(lookup))
        if unseen:
            raise DataError(f"{raw.path}: label values unseen in training: {unseen}")
        y = one_hot([lookup[v] for v in labels.astype(str)], len(spec.classes))
    else:
        y = pd.to_numeric(labels, errors="coerce").to_numpy(dtype=np.float64)[:, None]
        if np.isnan(y).any():
            raise DataError(f"{raw.path}: non-numeric regression target")
    flags = domains = None
    if flag_column and flag_column in frame.columns:
        flags = frame[flag_column].to_numpy(dtype=np.float64).astype(bool)
    if domain_column:
        if domain_column not in frame.columns:
            raise DataError(f"{raw.path}: domain column {domain_column!r} not found")
        domains = frame[domain_column].astype(str).to_numpy()
    return Dataset(x, y, spec.task, role, flags, domains)


def preprocess(
    train: RawTable,
    validation: RawTable | None = None,
    test: RawTable | None = None,
    task: str = "classification",
    flag_column: str | None = None,
    domain_column: str | None = None,
) -> tuple[Dataset, Dataset | None, Dataset | None, PreprocessSpec]:
    """Standardise numerics and one-hot categoricals using train statistics only."""
    meta = [c for c in (flag_column, domain_column) if c]
    cols = set(train.frame.columns)
    for other in (validation, test):
        if other is not None and set(other.frame.columns) - set(meta) != cols - set(meta):
            raise DataError(f"{other.path}: columns differ from the train split")
    spec = fit_spec(train, task, meta)
    out = [apply_spec(spec, train, "train", flag_column, domain_column)]
    for raw, role in ((validation, "validation"), (test, "test")):
        out.append(None if raw is None else apply_spec(spec, raw, role, flag_column, domain_column))
    return out[0], out[1], out[2], spec


def dataset_digest(*datasets: Dataset | None) -> str:
    h = hashlib.sha256()
    for d in datasets:
        if d is None:
            continue
        h.update(np.ascontiguousarray(d.features).tobytes())
        h.update(np.ascontiguousarray(d.labels).tobytes())
        if d.flags is not None:
            h.update(d.flags.tobytes())
    return h.hexdigest()


def write_values_csv(path, values, flags=None) -> None:
    """``index,value,flag`` rows; the flag column is empty when unknown."""
    values = np.asarray(values)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["index", "value", "flag"])
        for i, v in enumerate(values):
            flag = "" if flags is None else int(bool(flags[i]))
            writer.writerow([i, repr(float(v)), flag])


def read_values_csv(path) -> tuple[np.ndarray, np.ndarray | None]:
    frame = pd.read_csv(path, dtype=str, keep_default_na=False)
    if list(frame.columns) != ["index", "value", "flag"]:
        raise DataError(f"{path}: expected header index,value,flag")
    index = frame["index"].astype(int).to_numpy()
    if not np.array_equal(index, np.arange(index.size)):
        raise DataError(f"{path}: index column must be 0..N-1 in order")
    values = frame["value"].astype(float).to_numpy()
    flags = None
    if (frame["flag"] != "").all():
        flags = frame["flag"].astype(int).to_numpy().astype(bool)
    return values, flags


def write_curve_csv(path, points) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["fraction", "value"])
        for p in points:
            writer.writerow([repr(p.fraction), "" if p.skipped else repr(p.value)])


def write_json(path, payload) -> None:
    Path(path).write_text(json.dumps(payload, indent=2, sort_keys=True, default=_jsonable) + "\n")


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, tuple):
        return list(obj)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def write_dataset_csv(path, raw: RawTable, labels=None, flags=None, flag_column: str = "corrupted") -> None:
    """Write a raw table back out, optionally with new labels and a flag column."""
    frame = raw.frame.copy()
    if labels is not None:
        frame[raw.label] = labels
    if flags is not None:
        frame[flag_column] = np.asarray(flags, dtype=int)
    frame.to_csv(path, index=False, lineterminator="\n")
