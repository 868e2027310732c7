"""Command-line entry point.

Every subcommand writes ``report.json`` and ``values.csv`` (plus curve CSVs
where relevant) into ``--out``. Exit status is 0 on success, 2 for an
invalid configuration and 1 for a runtime failure; failures also leave an
``error.json`` record in the output directory when it is known.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import traceback
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import experiments as ex
from .baselines import MarginalEvaluator, loo_values, random_values, shapley_tmc
from .data import Dataset
from .engine import DvrlConfig, new_predictor, train_dvrl
from .io import (
    DataError,
    dataset_digest,
    load_csv,
    preprocess,
    read_values_csv,
    write_curve_csv,
    write_dataset_csv,
    write_json,
    write_values_csv,
)

log = logging.getLogger("dvrl")

COMMANDS = ("value", "discover", "remove-curve", "robust", "adapt", "sweep-validation", "corrupt")
METHODS = ("dvrl", "random", "loo", "shapley-tmc")
DVRL_FIELDS = {f.name for f in fields(DvrlConfig)} - {"seed"}


class ConfigError(ValueError):
    def __init__(self, problems: dict[str, str]):
        super().__init__("; ".join(f"{k}: {v}" for k, v in problems.items()))
        self.problems = problems


@dataclass
class RunConfig:
    command: str
    out: str = "dvrl-out"
    task: str = "classification"
    train: str | None = None
    validation: str | None = None
    test: str | None = None
    label: str = "label"
    categorical: list[str] = field(default_factory=list)
    flag_column: str = "corrupted"
    domain_column: str | None = None
    method: str = "dvrl"
    seed: int = 0
    metric: str | None = None
    dvrl: dict[str, Any] = field(default_factory=dict)
    permutations: int = 100
    tolerance: float | None = None
    baseline_iterations: int = 200
    fractions: list[float] | None = None
    sizes: list[int] = field(default_factory=lambda: [10, 100, 400])
    ratio: float = 0.2
    sigma: float = 0.0
    kind: str = "label-flip"
    values: str | None = None

    def problems(self) -> dict[str, str]:
        out = {}
        if self.command not in COMMANDS:
            out["command"] = f"must be one of {COMMANDS}"
        if self.task not in ("classification", "regression"):
            out["task"] = "must be classification or regression"
        if self.method not in METHODS:
            out["method"] = f"must be one of {METHODS}"
        if self.train is None:
            out["train"] = "required"
        needs = {
            "value": ("validation",) if self.method != "random" else (),
            "discover": () if self.values or self.method == "random" else ("validation",),
            "remove-curve": ("validation", "test") if self.method != "random" else ("test",),
            "robust": ("validation", "test"),
            "adapt": ("validation", "test"),
            "sweep-validation": ("validation",),
            "corrupt": (),
        }.get(self.command, ())
        for name in needs:
            if getattr(self, name) is None:
                out[name] = f"required by {self.command}"
        for name in ("train", "validation", "test", "values"):
            path = getattr(self, name)
            if path is not None and not Path(path).is_file():
                out[name] = f"file not found: {path}"
        if self.command in ("discover", "robust", "sweep-validation") and self.task != "classification":
            out["task"] = f"{self.command} needs label noise, so classification only"
        if self.command == "corrupt":
            if self.kind not in ("label-flip", "gaussian-feature"):
                out["kind"] = "must be label-flip or gaussian-feature"
            elif self.kind == "label-flip" and not 0 <= self.ratio <= 1:
                out["ratio"] = "must lie in [0, 1]"
            elif self.kind == "gaussian-feature" and not self.sigma > 0:
                out["sigma"] = "must be > 0"
        if self.permutations < 1:
            out["permutations"] = "must be >= 1"
        if self.baseline_iterations < 1:
            out["baseline_iterations"] = "must be >= 1"
        if self.command == "sweep-validation" and any(s < 1 for s in self.sizes):
            out["sizes"] = "every size must be >= 1"
        unknown = set(self.dvrl) - DVRL_FIELDS
        if unknown:
            out["dvrl"] = f"unknown keys {sorted(unknown)}"
        else:
            try:
                self.dvrl_config()
            except (ValueError, TypeError) as exc:
                out["dvrl"] = str(exc)
        return out

    def dvrl_config(self) -> DvrlConfig:
        return DvrlConfig(**{**self.dvrl, "seed": self.seed})

    def to_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def _csv_list(cast):
    def parse(text: str):
        return [cast(t) for t in text.split(",") if t.strip()]

    return parse


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    a = common.add_argument
    a("--config", help="JSON file supplying any of these options; flags override it")
    a("--out", help="output directory")
    a("--task", choices=["classification", "regression"])
    a("--train", help="training CSV")
    a("--validation", help="validation CSV (target distribution)")
    a("--test", help="test CSV")
    a("--label", help="label column name")
    a("--categorical", type=_csv_list(str), help="comma-separated categorical columns")
    a("--flag-column", dest="flag_column", help="column holding corruption flags")
    a("--domain-column", dest="domain_column", help="column holding a domain tag")
    a("--method", choices=METHODS)
    a("--seed", type=int)
    a("--metric", choices=["accuracy", "log_loss", "mse", "rmspe"])
    a("--permutations", type=int, help="TMC-Shapley permutations")
    a("--tolerance", type=float, help="TMC-Shapley truncation tolerance")
    a("--baseline-iterations", dest="baseline_iterations", type=int,
      help="training steps per retrain for loo / shapley-tmc")
    a("--fractions", type=_csv_list(float))
    a("--values", help="existing values.csv to use instead of computing values")
    g = common.add_argument_group("dvrl")
    g.add_argument("--outer-iterations", dest="outer_iterations", type=int)
    g.add_argument("--inner-iterations", dest="inner_iterations", type=int)
    g.add_argument("--predictor-batch", dest="predictor_batch", type=int)
    g.add_argument("--estimator-batch", dest="estimator_batch", type=int)
    g.add_argument("--window", type=int)
    g.add_argument("--lr-predictor", dest="lr_predictor", type=float)
    g.add_argument("--lr-estimator", dest="lr_estimator", type=float)
    g.add_argument("--init-mode", dest="init_mode", choices=["warm", "continue", "cold"])
    g.add_argument("--pretrain-iterations", dest="pretrain_iterations", type=int)
    g.add_argument("--predictor", choices=["logistic", "mlp"])
    g.add_argument("--preset", choices=["full", "desk"], help="hyperparameter preset (default desk)")

    parser = argparse.ArgumentParser(prog="dvrl", description="Data valuation with reinforcement learning")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name, parents=[common])
        if name == "sweep-validation":
            p.add_argument("--sizes", type=_csv_list(int))
        if name == "corrupt":
            p.add_argument("--kind", choices=["label-flip", "gaussian-feature"])
            p.add_argument("--ratio", type=float)
            p.add_argument("--sigma", type=float)
    return parser


def resolve_config(args: argparse.Namespace) -> RunConfig:
    """Merge defaults, the optional ``--config`` JSON file and explicit flags."""
    merged: dict[str, Any] = {}
    if args.config:
        try:
            merged = json.loads(Path(args.config).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError({"config": f"cannot read {args.config}: {exc}"}) from exc
        if not isinstance(merged, dict):
            raise ConfigError({"config": "must hold a JSON object"})
    dvrl = dict(merged.pop("dvrl", {}) or {})
    preset = merged.pop("preset", None)
    flags = {k: v for k, v in vars(args).items() if v is not None and k != "config"}
    preset = flags.pop("preset", preset) or "desk"
    if preset not in ("full", "desk"):
        raise ConfigError({"preset": "must be full or desk"})
    for key in list(flags):
        if key in DVRL_FIELDS:
            dvrl[key] = flags.pop(key)
    merged.update(flags)
    base = {} if preset == "full" else DvrlConfig.desk_scale().to_dict()
    base.pop("seed", None)
    merged["dvrl"] = {**base, **dvrl}
    known = {f.name for f in fields(RunConfig)}
    unknown = set(merged) - known
    if unknown:
        raise ConfigError({k: "unknown option" for k in sorted(unknown)})
    try:
        cfg = RunConfig(**merged)
    except TypeError as exc:
        raise ConfigError({"config": str(exc)}) from exc
    problems = cfg.problems()
    if problems:
        raise ConfigError(problems)
    return cfg


@dataclass
class Splits:
    train: Dataset
    validation: Dataset | None
    test: Dataset | None
    digest: str


def _load(cfg: RunConfig) -> Splits:
    cats = list(cfg.categorical)
    if cfg.domain_column and cfg.domain_column not in cats:
        cats.append(cfg.domain_column)
    raws = [load_csv(p, cfg.label, cats) if p else None for p in (cfg.train, cfg.validation, cfg.test)]
    train, val, test, _ = preprocess(*raws, task=cfg.task, flag_column=cfg.flag_column,
                                     domain_column=cfg.domain_column)
    return Splits(train, val, test, dataset_digest(train, val, test))


def _metric(cfg: RunConfig) -> str:
    return cfg.metric or ("accuracy" if cfg.task == "classification" else "mse")


def _evaluator(cfg: RunConfig, train: Dataset, holdout: Dataset) -> MarginalEvaluator:
    dc = cfg.dvrl_config()

    def factory(seed: int):
        return new_predictor(dc, train, np.random.default_rng(seed))

    return MarginalEvaluator(factory, holdout, _metric(cfg), cfg.seed, cfg.baseline_iterations, dc.predictor_batch)


def _values(cfg: RunConfig, s: Splits, report: dict) -> np.ndarray:
    if cfg.values:
        values, _ = read_values_csv(cfg.values)
        if values.size != len(s.train):
            raise DataError(f"{cfg.values} has {values.size} values for {len(s.train)} training rows")
        report["method"] = "file"
        return values
    if cfg.method == "random":
        return random_values(len(s.train), cfg.seed)
    if cfg.method == "dvrl":
        result = train_dvrl(s.train, s.validation, cfg.dvrl_config())
        report["traces"] = result.trace
        report["metrics"]["diverged"] = result.diverged
        return result.values
    evaluator = _evaluator(cfg, s.train, s.validation)
    if cfg.method == "loo":
        return loo_values(s.train, evaluator)
    return shapley_tmc(s.train, evaluator, cfg.permutations, cfg.tolerance, cfg.seed)


def _curve_payload(points) -> list[dict]:
    return [p.to_dict() for p in points]


def _write_traces(out: Path, trace: list[dict]) -> None:
    with open(out / "trace.jsonl", "w") as fh:
        for rec in trace:
            fh.write(json.dumps(rec, sort_keys=True) + "\n")


def execute(cfg: RunConfig) -> dict:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    report: dict[str, Any] = {
        "command": cfg.command,
        "config": cfg.to_dict(),
        "seed": cfg.seed,
        "method": cfg.method,
        "metrics": {},
        "curves": {},
    }

    if cfg.command == "corrupt":
        return _corrupt(cfg, out, report)

    s = _load(cfg)
    report["inputs_digest"] = s.digest
    flags = s.train.flags
    metric = _metric(cfg)

    if cfg.command in ("value", "discover", "remove-curve"):
        values = _values(cfg, s, report)
        report["metrics"]["mean_value"] = float(np.nanmean(values))
        if cfg.command == "discover":
            if flags is None:
                raise DataError(f"discover needs the {cfg.flag_column!r} column in the train split")
            curve = ex.discovery_curve(values, flags, cfg.fractions or ex.DISCOVERY_GRID)
            report["curves"]["discovery"] = _curve_payload(curve)
            write_curve_csv(out / "curve_discovery.csv", curve)
        elif cfg.command == "remove-curve":
            evaluator = _evaluator(cfg, s.train, s.test)
            for end in ("most", "least"):
                curve = ex.removal_curve(values, s.train, end, cfg.fractions or ex.REMOVAL_GRID, evaluator)
                report["curves"][f"remove_{end}"] = _curve_payload(curve)
                write_curve_csv(out / f"curve_remove_{end}.csv", curve)

    elif cfg.command == "robust":
        if flags is None:
            raise DataError(f"robust needs the {cfg.flag_column!r} column in the train split")
        res = ex.robust_learning_eval(s.train, s.validation, s.test, cfg.dvrl_config(), metric)
        result = res.pop("result")
        report["metrics"].update(res)
        report["traces"] = result.trace
        values = result.values

    elif cfg.command == "adapt":
        res = ex.domain_adaptation_eval(s.train, s.validation, s.test, cfg.dvrl_config(), metric)
        result = res.pop("result")
        report["metrics"].update(res)
        report["traces"] = result.trace
        values = result.values

    elif cfg.command == "sweep-validation":
        if flags is None:
            raise DataError(f"sweep-validation needs the {cfg.flag_column!r} column in the train split")
        sweep = ex.validation_size_sweep(s.train, s.validation, cfg.sizes, cfg.dvrl_config(),
                                         cfg.fractions or ex.DISCOVERY_GRID)
        for size in sorted(sweep):
            curve, result = sweep[size]
            report["curves"][f"validation_{size}"] = _curve_payload(curve)
            write_curve_csv(out / f"curve_validation_{size}.csv", curve)
            write_values_csv(out / f"values_validation_{size}.csv", result.values, flags)
        values = sweep[max(sweep)][1].values

    write_values_csv(out / "values.csv", values, flags)
    if report.get("traces"):
        _write_traces(out, report["traces"])
    write_json(out / "report.json", report)
    return report


def _corrupt(cfg: RunConfig, out: Path, report: dict) -> dict:
    raw = load_csv(cfg.train, cfg.label, cfg.categorical)
    train, _, _, spec = preprocess(raw, task=cfg.task)
    if cfg.kind == "label-flip":
        if cfg.task != "classification":
            raise DataError("label flips need a classification task")
        corrupted = ex.corrupt_labels(train, ex.CorruptionSpec("label-flip", ratio=cfg.ratio, seed=cfg.seed))
        labels = np.asarray(spec.classes, dtype=object)[corrupted.class_labels]
        write_dataset_csv(out / "train_corrupted.csv", raw, labels=labels, flags=corrupted.flags,
                          flag_column=cfg.flag_column)
        flags = corrupted.flags
    else:
        spec_c = ex.CorruptionSpec("gaussian-feature", sigma=cfg.sigma, seed=cfg.seed)
        rng = np.random.default_rng(spec_c.seed)
        frame = raw.frame.copy()
        # noise is added in standardised units, then mapped back to raw units
        for col, (_, std) in spec.numeric.items():
            frame[col] = frame[col] + rng.normal(0.0, spec_c.sigma, size=len(frame)) * std
        raw.frame = frame
        write_dataset_csv(out / "train_corrupted.csv", raw)
        report["metrics"]["rows"] = len(frame)
        # every row is perturbed, so there is no informative oracle ranking
        write_values_csv(out / "values.csv", np.ones(len(frame)))
        write_json(out / "report.json", report)
        return report
    report["metrics"]["corrupted_rows"] = int(flags.sum())
    report["metrics"]["rows"] = int(flags.size)
    # oracle values: corrupted rows rank lowest, i.e. the optimal discovery order
    write_values_csv(out / "values.csv", (~flags).astype(float), flags)
    write_json(out / "report.json", report)
    return report


def _error_record(out: str | None, payload: dict) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True)
    print(text, file=sys.stderr)
    if out:
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "error.json").write_text(text + "\n")
        except OSError:
            pass


def run_command(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    out = getattr(args, "out", None)
    try:
        cfg = resolve_config(args)
    except ConfigError as exc:
        _error_record(out, {"error": "invalid_config", "fields": exc.problems})
        return 2
    try:
        execute(cfg)
    except Exception as exc:  # noqa: BLE001 - surfaced as a machine-readable record
        _error_record(cfg.out, {
            "error": "runtime",
            "type": type(exc).__name__,
            "message": str(exc),
            "trace": traceback.format_exc(),
        })
        return 1
    return 0


def main() -> None:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    sys.exit(run_command())


if __name__ == "__main__":
    main()
