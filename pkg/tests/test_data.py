import numpy as np
import pytest

from dvrl.data import Dataset, one_hot


class TestDataset:
    def test_from_labels_one_hot(self):
        d = Dataset.from_labels(np.zeros((3, 2)), [0, 2, 1], 3)
        np.testing.assert_array_equal(d.labels, [[1, 0, 0], [0, 0, 1], [0, 1, 0]])
        np.testing.assert_array_equal(d.class_labels, [0, 2, 1])

    def test_row_counts_must_agree(self):
        with pytest.raises(ValueError, match="rows"):
            Dataset(np.zeros((3, 2)), one_hot([0, 1], 2))

    def test_classification_labels_must_be_one_hot(self):
        with pytest.raises(ValueError, match="one-hot"):
            Dataset(np.zeros((2, 1)), np.array([[0.5, 0.5], [1.0, 0.0]]))

    def test_flags_must_cover_all_rows(self):
        with pytest.raises(ValueError, match="flags"):
            Dataset.from_labels(np.zeros((3, 1)), [0, 1, 0], 2, flags=[True, False])

    def test_subset_keeps_metadata_and_origin(self):
        d = Dataset.from_labels(np.arange(8.0).reshape(4, 2), [0, 1, 0, 1], 2,
                                flags=[True, False, False, True], domains=[0, 0, 1, 1])
        s = d.subset([3, 1])
        np.testing.assert_array_equal(s.index, [3, 1])
        np.testing.assert_array_equal(s.flags, [True, False])
        np.testing.assert_array_equal(s.domains, [1, 0])
        np.testing.assert_array_equal(s.subset(np.array([False, True])).index, [1])

    def test_regression_single_column(self):
        d = Dataset(np.zeros((2, 1)), [1.5, -2.0], task="regression")
        assert d.labels.shape == (2, 1)
        with pytest.raises(ValueError):
            d.class_labels

    def test_unknown_role(self):
        with pytest.raises(ValueError, match="role"):
            Dataset.from_labels(np.zeros((1, 1)), [0], 2, role="holdout")

    def test_one_hot_range(self):
        with pytest.raises(ValueError):
            one_hot([0, 3], 3)
