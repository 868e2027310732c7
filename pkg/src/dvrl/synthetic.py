"""Small synthetic benchmarks with known structure."""

from __future__ import annotations

import numpy as np

from .data import Dataset


def gaussian_blobs(
    n: int,
    n_features: int = 2,
    separation: float = 4.0,
    seed: int | np.random.Generator | None = 0,
    role: str = "train",
    positive_fraction: float = 0.5,
    spreads: tuple[float, float] = (1.0, 1.0),
) -> Dataset:
    """Two isotropic Gaussian classes with means ``±separation/2`` along the
    first axis and standard deviations ``spreads``; class 1 has probability
    ``positive_fraction``."""
    rng = np.random.default_rng(seed)
    y = (rng.random(n) < positive_fraction).astype(np.int64)
    x = rng.standard_normal((n, n_features)) * np.where(y == 1, spreads[1], spreads[0])[:, None]
    x[:, 0] += np.where(y == 1, separation / 2, -separation / 2)
    return Dataset.from_labels(x, y, 2, role=role)


def blob_benchmark(
    n_train: int = 1000,
    n_validation: int = 400,
    n_test: int = 2000,
    n_features: int = 2,
    separation: float = 4.0,
    seed: int = 0,
    positive_fraction: float = 0.5,
    spreads: tuple[float, float] = (0.6, 1.6),
) -> tuple[Dataset, Dataset, Dataset]:
    """Clean train/validation/test splits drawn from one blob distribution.

    The classes have unequal spreads by default. With equal spreads,
    symmetric label flips leave the optimal linear boundary where it was,
    so noise barely hurts a logistic predictor and removal curves carry no
    signal.
    """
    ss = np.random.SeedSequence(seed)
    a, b, c = (np.random.default_rng(s) for s in ss.spawn(3))
    args = (n_features, separation)
    kw = dict(positive_fraction=positive_fraction, spreads=spreads)
    return (
        gaussian_blobs(n_train, *args, a, "train", **kw),
        gaussian_blobs(n_validation, *args, b, "validation", **kw),
        gaussian_blobs(n_test, *args, c, "test", **kw),
    )


def _cluster(n: int, center: float, flip: bool, noise_dims: int, rng: np.random.Generator, domain: int):
    # the class is decided by the second coordinate; the rule is mirrored
    # between clusters, so one linear model cannot serve both
    x = rng.standard_normal((n, 2 + noise_dims))
    x[:, 0] = center + 0.5 * x[:, 0]
    y = (x[:, 1] > 0).astype(np.int64)
    if flip:
        y = 1 - y
    return x, y, np.full(n, domain)


def domain_shift_benchmark(
    n_source: int = 1000,
    target_fraction: float = 0.1,
    n_validation: int = 200,
    n_test: int = 1000,
    noise_dims: int = 0,
    seed: int = 0,
) -> tuple[Dataset, Dataset, Dataset]:
    """Source drawn mostly from cluster A (domain 0), partly from the target
    cluster B (domain 1); validation and test come from B only.

    Labels follow ``x2 > 0`` in A and ``x2 < 0`` in B.
    """
    rng = np.random.default_rng(seed)
    n_b = int(round(target_fraction * n_source))
    xa, ya, da = _cluster(n_source - n_b, -2.0, False, noise_dims, rng, 0)
    xb, yb, db = _cluster(n_b, 2.0, True, noise_dims, rng, 1)
    order = rng.permutation(n_source)
    x = np.vstack([xa, xb])[order]
    y = np.concatenate([ya, yb])[order]
    d = np.concatenate([da, db])[order]
    source = Dataset.from_labels(x, y, 2, role="train", domains=d)
    xv, yv, dv = _cluster(n_validation, 2.0, True, noise_dims, rng, 1)
    xt, yt, dt = _cluster(n_test, 2.0, True, noise_dims, rng, 1)
    validation = Dataset.from_labels(xv, yv, 2, role="validation", domains=dv)
    test = Dataset.from_labels(xt, yt, 2, role="test", domains=dt)
    return source, validation, test


def _frame(data: Dataset, rng: np.random.Generator | None = None, flag_column: str | None = None,
           domain_column: str | None = None):
    import pandas as pd

    frame = pd.DataFrame({f"x{j + 1}": data.features[:, j] for j in range(data.n_features)})
    if rng is not None:
        # an uninformative categorical column, to exercise one-hot encoding
        frame["site"] = rng.choice(np.array(["north", "south", "west"]), size=len(data))
    frame["label"] = data.class_labels
    if flag_column:
        frame[flag_column] = data.flags.astype(int)
    if domain_column:
        frame[domain_column] = np.where(data.domains == 1, "B", "A")
    return frame


def write_blob_csvs(directory, seed: int = 0, ratio: float = 0.2, **benchmark) -> dict[str, str]:
    """Write the blob benchmark as CSV files.

    Produces ``train.csv`` (clean), ``train_noisy.csv`` (labels flipped at
    ``ratio`` with a ``corrupted`` column), ``validation.csv`` and
    ``test.csv``. Returns the paths by split name.
    """
    from pathlib import Path

    from .experiments import CorruptionSpec, corrupt_labels

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    train, val, test = blob_benchmark(seed=seed, **benchmark)
    noisy = corrupt_labels(train, CorruptionSpec(ratio=ratio, seed=seed))
    rng = np.random.default_rng([seed, 99])
    cats = rng.choice(np.array(["north", "south", "west"]), size=len(train))
    paths = {}
    for name, data, flag in (("train", train, None), ("train_noisy", noisy, "corrupted"),
                             ("validation", val, None), ("test", test, None)):
        frame = _frame(data, rng, flag)
        if name.startswith("train"):
            frame["site"] = cats
        paths[name] = str(out / f"{name}.csv")
        frame.to_csv(paths[name], index=False, lineterminator="\n", float_format="%.10g")
    return paths


def write_domain_csvs(directory, seed: int = 0, **benchmark) -> dict[str, str]:
    """Write the domain-shift benchmark as ``source.csv`` (with a ``domain``
    column), ``target_validation.csv`` and ``target_test.csv``."""
    from pathlib import Path

    out = Path(directory)
    out.mkdir(parents=True, exist_ok=True)
    source, val, test = domain_shift_benchmark(seed=seed, **benchmark)
    paths = {}
    for name, data in (("source", source), ("target_validation", val), ("target_test", test)):
        paths[name] = str(out / f"{name}.csv")
        _frame(data, domain_column="domain").to_csv(
            paths[name], index=False, lineterminator="\n", float_format="%.10g")
    return paths
