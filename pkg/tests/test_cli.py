import json

import numpy as np
import pandas as pd
import pytest

from dvrl import fixture_path
from dvrl.cli import build_parser, resolve_config, run_command
from dvrl.experiments import discovery_curve
from dvrl.io import read_values_csv

TRAIN = fixture_path("train.csv")
NOISY = fixture_path("train_noisy.csv")
VAL = fixture_path("validation.csv")
TEST = fixture_path("test.csv")
FAST = ["--outer-iterations", "40", "--pretrain-iterations", "300"]


def run(tmp_path, name, *args):
    out = tmp_path / name
    code = run_command([*args, "--out", str(out)])
    return code, out


def report(out):
    return json.loads((out / "report.json").read_text())


class TestValue:
    def test_seed_7_is_byte_identical(self, tmp_path):
        args = ("value", "--train", NOISY, "--validation", VAL, "--categorical", "site", "--seed", "7")
        c1, a = run(tmp_path, "a", *args)
        c2, b = run(tmp_path, "b", *args)
        assert c1 == c2 == 0
        assert (a / "values.csv").read_bytes() == (b / "values.csv").read_bytes()
        assert (a / "trace.jsonl").read_bytes() == (b / "trace.jsonl").read_bytes()

    def test_report_contents(self, tmp_path):
        code, out = run(tmp_path, "v", "value", "--train", NOISY, "--validation", VAL,
                        "--categorical", "site", *FAST)
        assert code == 0
        r = report(out)
        assert r["command"] == "value" and r["method"] == "dvrl" and r["seed"] == 0
        assert r["config"]["dvrl"]["outer_iterations"] == 40
        assert len(r["traces"]) == 40
        assert len(r["inputs_digest"]) == 64
        lines = (out / "trace.jsonl").read_text().splitlines()
        assert json.loads(lines[0])["iteration"] == 0
        values, flags = read_values_csv(out / "values.csv")
        assert values.size == 1000 and flags.sum() == 200

    @pytest.mark.parametrize("method", ["random", "loo", "shapley-tmc"])
    def test_baseline_methods(self, tmp_path, method):
        small = tmp_path / "small.csv"
        pd.read_csv(NOISY).head(30).to_csv(small, index=False)
        code, out = run(tmp_path, method, "value", "--method", method, "--train", str(small),
                        "--validation", VAL, "--categorical", "site", "--permutations", "3",
                        "--baseline-iterations", "20")
        assert code == 0
        assert read_values_csv(out / "values.csv")[0].size == 30


class TestDiscover:
    def test_random_is_near_diagonal(self, tmp_path):
        code, out = run(tmp_path, "d", "discover", "--method", "random", "--train", NOISY, "--categorical", "site")
        assert code == 0
        curve = pd.read_csv(out / "curve_discovery.csv")
        assert np.all(np.abs(curve["value"] - curve["fraction"]) < 0.1)

    def test_values_file_round_trip(self, tmp_path):
        _, first = run(tmp_path, "v", "value", "--train", NOISY, "--validation", VAL, "--categorical", "site", *FAST)
        code, out = run(tmp_path, "d", "discover", "--train", NOISY, "--categorical", "site",
                        "--values", str(first / "values.csv"))
        assert code == 0
        values, flags = read_values_csv(first / "values.csv")
        expected = [p.to_dict() for p in discovery_curve(values, flags)]
        assert report(out)["curves"]["discovery"] == expected
        assert report(out)["method"] == "file"

    def test_missing_flags_is_runtime_error(self, tmp_path):
        code, out = run(tmp_path, "d", "discover", "--method", "random", "--train", TRAIN, "--categorical", "site")
        assert code == 1
        err = json.loads((out / "error.json").read_text())
        assert err["error"] == "runtime" and "corrupted" in err["message"] and "Traceback" in err["trace"]


class TestOtherCommands:
    def test_remove_curve(self, tmp_path):
        code, out = run(tmp_path, "r", "remove-curve", "--method", "random", "--train", NOISY, "--test", TEST,
                        "--categorical", "site", "--fractions", "0,0.2", "--baseline-iterations", "50")
        assert code == 0
        r = report(out)
        assert r["curves"]["remove_most"][0]["value"] == r["curves"]["remove_least"][0]["value"]
        assert (out / "curve_remove_most.csv").exists() and (out / "curve_remove_least.csv").exists()

    def test_corrupt_exact_count(self, tmp_path):
        code, out = run(tmp_path, "c", "corrupt", "--train", TRAIN, "--categorical", "site", "--ratio", "0.2")
        assert code == 0
        frame = pd.read_csv(out / "train_corrupted.csv")
        assert len(frame) == 1000 and frame["corrupted"].sum() == 200
        clean = pd.read_csv(TRAIN)
        flagged = frame["corrupted"] == 1
        assert np.all(frame.loc[flagged, "label"] != clean.loc[flagged, "label"])
        assert np.all(frame.loc[~flagged, "label"] == clean.loc[~flagged, "label"])
        np.testing.assert_array_equal(frame["x1"], clean["x1"])
        values, flags = read_values_csv(out / "values.csv")
        np.testing.assert_array_equal(values, (~flags).astype(float))

    def test_corrupt_features(self, tmp_path):
        code, out = run(tmp_path, "c", "corrupt", "--kind", "gaussian-feature", "--sigma", "0.5",
                        "--train", TRAIN, "--categorical", "site")
        assert code == 0
        frame, clean = pd.read_csv(out / "train_corrupted.csv"), pd.read_csv(TRAIN)
        ratio = (frame["x1"] - clean["x1"]).std() / clean["x1"].std(ddof=0)
        assert ratio == pytest.approx(0.5, rel=0.1)
        assert frame["label"].equals(clean["label"])

    def test_robust(self, tmp_path):
        code, out = run(tmp_path, "r", "robust", "--train", NOISY, "--validation", VAL, "--test", TEST,
                        "--categorical", "site", *FAST)
        assert code == 0
        assert set(report(out)["metrics"]) == {"dvrl", "baseline", "clean_only", "validation_only"}

    def test_adapt(self, tmp_path):
        code, out = run(tmp_path, "a", "adapt", "--train", fixture_path("source.csv"),
                        "--validation", fixture_path("target_validation.csv"),
                        "--test", fixture_path("target_test.csv"), "--domain-column", "domain", *FAST)
        assert code == 0
        assert set(report(out)["metrics"]["mean_value_by_domain"]) == {"A", "B"}

    def test_sweep(self, tmp_path):
        code, out = run(tmp_path, "s", "sweep-validation", "--train", NOISY, "--validation", VAL,
                        "--categorical", "site", "--sizes", "10,50", *FAST)
        assert code == 0
        assert set(report(out)["curves"]) == {"validation_10", "validation_50"}
        assert (out / "values.csv").read_bytes() == (out / "values_validation_50.csv").read_bytes()


class TestConfiguration:
    def test_invalid_config_exit_2_with_fields(self, tmp_path):
        code, out = run(tmp_path, "e", "value", "--train", NOISY, "--window", "0")
        assert code == 2
        err = json.loads((out / "error.json").read_text())
        assert err["error"] == "invalid_config"
        assert set(err["fields"]) >= {"validation", "dvrl"}
        assert "window" in err["fields"]["dvrl"]

    def test_missing_file(self, tmp_path):
        code, out = run(tmp_path, "e", "value", "--train", str(tmp_path / "nope.csv"), "--validation", VAL)
        assert code == 2
        assert "file not found" in json.loads((out / "error.json").read_text())["fields"]["train"]

    def test_unknown_subcommand(self):
        assert run_command(["explode"]) == 2

    def test_config_file_with_flag_override(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"train": NOISY, "validation": VAL, "seed": 3,
                                   "dvrl": {"outer_iterations": 12, "window": 2}}))
        args = build_parser().parse_args(["value", "--config", str(cfg), "--seed", "9", "--window", "4"])
        rc = resolve_config(args)
        assert rc.seed == 9
        assert rc.dvrl["outer_iterations"] == 12 and rc.dvrl["window"] == 4
        assert rc.dvrl_config().seed == 9

    def test_unknown_config_key(self, tmp_path):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"train": NOISY, "colour": "blue"}))
        code, out = run(tmp_path, "e", "value", "--config", str(cfg))
        assert code == 2
        assert "colour" in json.loads((out / "error.json").read_text())["fields"]

    def test_presets(self):
        desk = resolve_config(build_parser().parse_args(["value", "--train", NOISY, "--validation", VAL]))
        full = resolve_config(build_parser().parse_args(
            ["value", "--train", NOISY, "--validation", VAL, "--preset", "full"]))
        assert desk.dvrl_config().estimator_batch == 256
        assert full.dvrl_config().estimator_batch == 2000
        assert full.dvrl_config().inner_iterations == 200

    def test_classification_only_commands(self, tmp_path):
        code, out = run(tmp_path, "e", "discover", "--task", "regression", "--train", NOISY, "--validation", VAL)
        assert code == 2
        assert "task" in json.loads((out / "error.json").read_text())["fields"]
