import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from dvrl.data import Dataset
from dvrl.nn import MlpParams, OptimizerState, ShapeError, mlp_backward, optimizer_step, softmax
from dvrl.predictor import (
    ZeroWeightWarning,
    evaluate,
    fit,
    fit_weighted,
    make_predictor,
    predict,
    rmspe,
    score_predictions,
)


def _zero_logistic(d=2, c=2, lr=0.1, optimizer="sgd"):
    m = make_predictor("logistic", d, c, lr=lr, optimizer=optimizer, seed=0)
    for a in m.params.arrays():
        a[...] = 0.0
    return m


class TestFitWeighted:
    def test_unit_weights_match_plain_gradient_descent(self, tiny_classification):
        """Independent loop: mean softmax cross-entropy gradient over the full batch."""
        model = make_predictor("logistic", 2, 2, lr=0.05, optimizer="sgd", seed=3)
        ref = model.params.copy()
        state = OptimizerState("sgd", 0.05)
        x, y = tiny_classification.features, tiny_classification.labels
        for _ in range(15):
            p = softmax(x @ ref.weights[0] + ref.biases[0])
            optimizer_step(state, ref, mlp_backward(ref, x, (p - y) / len(x), wrt="logits"))
        fit_weighted(model, tiny_classification, np.ones(6), 15, 6, seed=0)
        np.testing.assert_allclose(model.params.flat(), ref.flat(), rtol=1e-13, atol=1e-15)

    def test_all_zero_weights_warn_and_do_nothing(self, tiny_classification):
        model = make_predictor("logistic", 2, 2, seed=1)
        before = model.params.flat()
        with pytest.warns(ZeroWeightWarning):
            fit_weighted(model, tiny_classification, np.zeros(6), 10, 4)
        np.testing.assert_array_equal(model.params.flat(), before)

    def test_two_samples_weights_one_zero(self):
        """One full-batch SGD step from zero weights, worked by hand.

        With zero weights the softmax is (0.5, 0.5). Sample 1 is x=(2, -1),
        class 1, so its logit gradient is (0.5, -0.5). Weight (1, 0) and
        batch size 2 give half of it.
        """
        data = Dataset.from_labels([[2.0, -1.0], [0.5, 3.0]], [1, 0], 2)
        model = _zero_logistic(lr=0.1)
        fit_weighted(model, data, [1.0, 0.0], iterations=1, batch_size=2)
        g_logit = np.array([0.5, -0.5]) / 2
        expected_w = -0.1 * np.outer([2.0, -1.0], g_logit)
        expected_b = -0.1 * g_logit
        np.testing.assert_allclose(model.params.weights[0], expected_w, atol=1e-15)
        np.testing.assert_allclose(model.params.biases[0], expected_b, atol=1e-15)

        alone = _zero_logistic(lr=0.1)
        fit_weighted(alone, data.subset([0]), [1.0], iterations=1, batch_size=1)
        np.testing.assert_allclose(model.params.weights[0], alone.params.weights[0] / 2, atol=1e-15)

    def test_zero_weight_equals_removal_in_full_batch(self, rng):
        x = rng.normal(size=(9, 3))
        data = Dataset.from_labels(x, rng.integers(0, 3, 9), 3)
        w = np.ones(9)
        w[4] = 0.0
        a = make_predictor("logistic", 3, 3, lr=0.05, seed=2)
        b = a.copy()
        fit_weighted(a, data, w, iterations=25, batch_size=16)
        keep = np.delete(np.arange(9), 4)
        fit_weighted(b, data.subset(keep), np.ones(8), iterations=25, batch_size=16)
        np.testing.assert_array_equal(a.params.flat(), b.params.flat())

    def test_divisor_is_configured_batch_size(self):
        data = Dataset.from_labels([[1.0, 0.0]], [1], 2)
        small, large = _zero_logistic(), _zero_logistic()
        fit_weighted(small, data, [1.0], 1, batch_size=1)
        fit_weighted(large, data, [1.0], 1, batch_size=4)
        np.testing.assert_allclose(large.params.flat(), small.params.flat() / 4, atol=1e-15)

    def test_seeded_determinism(self, rng):
        data = Dataset.from_labels(rng.normal(size=(50, 4)), rng.integers(0, 2, 50), 2)
        w = rng.uniform(size=50)
        runs = []
        for _ in range(2):
            m = make_predictor("mlp_classifier", 4, 2, hidden=(8,), seed=4)
            runs.append(fit_weighted(m, data, w, 30, 16, seed=9).params.flat())
        np.testing.assert_array_equal(*runs)

    def test_refuses_non_train_split(self, tiny_classification):
        with pytest.raises(ValueError, match="validation"):
            fit(make_predictor("logistic", 2, 2), tiny_classification.with_role("validation"))

    @pytest.mark.parametrize("bad", [-0.1, 1.5, np.nan])
    def test_weights_in_unit_interval(self, tiny_classification, bad):
        w = np.ones(6)
        w[2] = bad
        with pytest.raises(ValueError, match=r"\[0, 1\]"):
            fit_weighted(make_predictor("logistic", 2, 2), tiny_classification, w, 1)

    def test_weight_length(self, tiny_classification):
        with pytest.raises(ShapeError):
            fit_weighted(make_predictor("logistic", 2, 2), tiny_classification, np.ones(5), 1)

    def test_fit_does_not_warn(self, tiny_classification):
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            fit(make_predictor("logistic", 2, 2), tiny_classification, 5, 4)


class TestPredict:
    def test_zero_logistic_is_uniform(self, rng):
        np.testing.assert_array_equal(predict(_zero_logistic(), rng.normal(size=(4, 2))), 0.5)

    def test_zero_regressor_predicts_zero(self, rng):
        m = make_predictor("mlp_regressor", 3, 1, hidden=(5,))
        for a in m.params.arrays():
            a[...] = 0.0
        np.testing.assert_array_equal(predict(m, rng.normal(size=(4, 3))), 0.0)

    def test_separable_pair_is_learned(self):
        data = Dataset.from_labels([[-1.0, 0.5], [1.0, -0.5]], [0, 1], 2)
        m = make_predictor("logistic", 2, 2, lr=0.1, seed=0)
        fit(m, data, 500, 2)
        np.testing.assert_array_equal(np.argmax(predict(m, data.features), axis=1), [0, 1])

    def test_regressor_fits_a_line(self, tiny_regression):
        m = make_predictor("mlp_regressor", 1, 1, hidden=(16,), lr=0.02, seed=0)
        fit(m, tiny_regression, 3000, 4)
        assert evaluate(m, tiny_regression, "mse") < 1e-2

    def test_dimension_mismatch(self):
        with pytest.raises(ShapeError):
            predict(make_predictor("logistic", 3, 2), np.ones((2, 4)))

    def test_task_mismatch(self, tiny_regression):
        with pytest.raises(ValueError, match="regression"):
            fit(make_predictor("logistic", 1, 1), tiny_regression, 1)


class TestMetrics:
    def test_perfect_predictions(self):
        cls = Dataset.from_labels(np.zeros((3, 1)), [0, 1, 1], 2)
        assert score_predictions(cls.labels, cls, "accuracy") == 1.0
        reg = Dataset(np.zeros((3, 1)), [1.0, -2.0, 4.0], task="regression")
        assert score_predictions(reg.labels, reg, "mse") == 0.0
        assert score_predictions(reg.labels, reg, "rmspe") == 0.0

    def test_ties_go_to_lowest_class(self):
        data = Dataset.from_labels(np.zeros((5, 1)), [0, 1, 1, 0, 1], 2)
        pred = np.full((5, 2), 0.5)
        assert score_predictions(pred, data, "accuracy") == pytest.approx(2 / 5)

    def test_rmspe_ten_percent(self):
        y = np.array([1.0, -3.0, 20.0])
        assert rmspe(y, 1.1 * y) == pytest.approx(0.1, rel=1e-12)

    def test_rmspe_zero_target_lists_rows(self):
        with pytest.raises(ValueError, match=r"\[1, 3\]"):
            rmspe([1.0, 0.0, 2.0, 0.0], [1.0, 1.0, 1.0, 1.0])

    def test_metric_task_compatibility(self):
        reg = Dataset(np.zeros((2, 1)), [1.0, 2.0], task="regression")
        with pytest.raises(ValueError):
            score_predictions(reg.labels, reg, "accuracy")

    @given(st.integers(0, 2**31 - 1), st.sampled_from([np.exp, np.cbrt, lambda p: 3 * p + 1]))
    def test_accuracy_invariant_under_monotone_maps(self, seed, fn):
        r = np.random.default_rng(seed)
        data = Dataset.from_labels(np.zeros((20, 1)), r.integers(0, 3, 20), 3)
        p = softmax(r.normal(size=(20, 3)))
        assert score_predictions(fn(p), data, "accuracy") == score_predictions(p, data, "accuracy")
