"""Data valuation with reinforcement learning.

A value estimator learns, through REINFORCE, which training rows help a
predictor on a clean validation set. Leave-one-out and Shapley baselines,
evaluation protocols and a CLI are included.
"""

from importlib.resources import files

from .baselines import MarginalEvaluator, loo_values, random_values, shapley_exact, shapley_tmc
from .data import Dataset, one_hot
from .engine import DvrlConfig, ValuationResult, infer_predictions, infer_values, train_dvrl
from .estimator import make_estimator
from .predictor import evaluate, fit, fit_weighted, make_predictor, predict

__version__ = "0.1.0"


def fixture_path(name: str) -> str:
    """Path of a bundled CSV fixture, e.g. ``fixture_path("train_noisy.csv")``."""
    return str(files("dvrl") / "fixtures" / name)


__all__ = [
    "Dataset",
    "DvrlConfig",
    "MarginalEvaluator",
    "ValuationResult",
    "evaluate",
    "fit",
    "fit_weighted",
    "fixture_path",
    "infer_predictions",
    "infer_values",
    "loo_values",
    "make_estimator",
    "make_predictor",
    "one_hot",
    "predict",
    "random_values",
    "shapley_exact",
    "shapley_tmc",
    "train_dvrl",
]
