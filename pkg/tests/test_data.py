"""Datasets, generators, CSV ingestion and background computation."""
from __future__ import annotations

import numpy as np
import pytest

from attrloop.data import (
    Background,
    DataError,
    Dataset,
    EmptyDataError,
    LinearGroundTruth,
    Link,
    MissingColumnError,
    MissingFileError,
    NonNumericCellError,
    Task,
    compute_background,
    generate_linear,
    generate_logistic,
    heaviside,
    load_csv,
    load_csv_with_schema,
    load_schema,
    save_csv,
    split_shuffle,
)


def test_heaviside_boundary_goes_up():
    assert heaviside(0.3) == 1.0
    assert heaviside(-0.3) == 0.0
    assert heaviside(0.0) == 1.0


class TestDataset:
    def test_shape_and_metadata(self):
        data = Dataset(np.array([[1.0, 2.0]]), np.array([3.0]), ("a", "b"), (True, True), Task.REGRESSION)
        assert data.n == 1 and data.m == 2
        assert data.feature_names == ("a", "b")

    def test_features_are_frozen(self):
        data = Dataset(np.array([[1.0, 2.0]]), np.array([3.0]), ("a", "b"), (True, True), Task.REGRESSION)
        with pytest.raises(ValueError):
            data.features[0, 0] = 9.0

    def test_target_length_must_match(self):
        with pytest.raises(DataError):
            Dataset(np.array([[1.0], [2.0]]), np.array([1.0]), ("a",), (True,), Task.REGRESSION)

    def test_classification_targets_must_be_binary(self):
        with pytest.raises(DataError):
            Dataset(np.array([[1.0]]), np.array([0.5]), ("a",), (True,), Task.CLASSIFICATION)

    def test_discrete_flag_rejects_fractional_column(self):
        with pytest.raises(DataError):
            Dataset(np.array([[1.5]]), np.array([1.0]), ("a",), (True,), Task.REGRESSION)

    def test_subset_picks_rows(self):
        data = Dataset(np.array([[1.0], [2.0], [3.0]]), np.array([1.0, 2.0, 3.0]), ("a",), (True,), Task.REGRESSION)
        part = data.subset([2, 0])
        assert part.features[:, 0].tolist() == [3.0, 1.0]
        assert part.targets.tolist() == [3.0, 1.0]


class TestGenerateLinear:
    def test_requested_shapes(self):
        train, test, gt = generate_linear(0, 50, 100, 5)
        assert train.features.shape == (50, 5)
        assert test.features.shape == (100, 5)
        assert gt.weights.shape == (5,)

    def test_targets_are_noiseless(self):
        # Recompute y row by row from the emitted coefficients.
        train, test, gt = generate_linear(7, 3, 3, 2)
        for x, y in zip(train.features, train.targets):
            assert y == pytest.approx(float(gt.weights @ x + gt.intercept), abs=1e-12)
        assert np.max(np.abs(test.targets - (test.features @ gt.weights + gt.intercept))) <= 1e-12

    def test_zero_weight_function_is_constant(self):
        gt = LinearGroundTruth(np.zeros(3), 0.75)
        assert gt(np.array([4.0, -2.0, 9.0])) == 0.75
        assert gt.batch(np.random.default_rng(0).standard_normal((10, 3))).tolist() == [0.75] * 10

    def test_coefficients_stay_in_unit_interval(self):
        _, _, gt = generate_linear(11, 2, 2, 8)
        assert np.all(np.abs(gt.weights) <= 1.0)
        assert abs(gt.intercept) <= 1.0

    def test_same_seed_same_data(self):
        a = generate_linear(42, 10, 10, 4)
        b = generate_linear(42, 10, 10, 4)
        assert np.array_equal(a[0].features, b[0].features)
        assert np.array_equal(a[1].targets, b[1].targets)
        assert np.array_equal(a[2].weights, b[2].weights)

    def test_rejects_empty_sizes(self):
        with pytest.raises(DataError):
            generate_linear(0, 0, 5, 2)


class TestGenerateLogistic:
    def test_thresholded_labels(self):
        gt = LinearGroundTruth(np.array([1.0]), 0.0, Link.HEAVISIDE)
        assert gt(np.array([0.3])) == 1.0
        assert gt(np.array([-0.3])) == 0.0

    def test_both_classes_present(self):
        train, test, gt = generate_logistic(3, 100, 100, 5)
        assert 0.0 < train.targets.mean() < 1.0
        assert 0.0 < test.targets.mean() < 1.0
        assert train.task is Task.CLASSIFICATION

    def test_labels_match_ground_truth(self):
        train, _, gt = generate_logistic(9, 20, 20, 3)
        assert np.array_equal(train.targets, gt.batch(train.features))

    def test_same_seed_same_data(self):
        a = generate_logistic(5, 30, 30, 4)
        b = generate_logistic(5, 30, 30, 4)
        assert np.array_equal(a[0].targets, b[0].targets)
        assert a[2].intercept == b[2].intercept


class TestLoadCsv:
    def test_minimal_single_cell(self, tmp_path):
        path = tmp_path / "one.csv"
        path.write_text("a,target\n1.5,2.0\n")
        data = load_csv(path, "target", ["a"], Task.REGRESSION)
        assert data.n == 1 and data.m == 1
        assert data.features[0, 0] == 1.5

    def test_column_order_follows_request(self, tmp_path):
        path = tmp_path / "cols.csv"
        path.write_text("b,a,y\n2.0,1.0,0.0\n")
        data = load_csv(path, "y", ["a", "b"], Task.REGRESSION)
        assert data.features[0].tolist() == [1.0, 2.0]

    def test_missing_file(self, tmp_path):
        with pytest.raises(MissingFileError):
            load_csv(tmp_path / "absent.csv", "y", ["a"], Task.REGRESSION)

    def test_missing_column(self, tmp_path):
        path = tmp_path / "short.csv"
        path.write_text("a,y\n1,2\n")
        with pytest.raises(MissingColumnError):
            load_csv(path, "y", ["a", "b"], Task.REGRESSION)

    def test_non_numeric_cell_names_location(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,y\n1,2\nx,3\n")
        with pytest.raises(NonNumericCellError, match=r"bad.csv:3"):
            load_csv(path, "y", ["a"], Task.REGRESSION)

    def test_rows_with_missing_values_are_dropped(self, tmp_path):
        path = tmp_path / "gaps.csv"
        path.write_text("a,y\n1,2\n,3\nNA,4\n5,6\n")
        data = load_csv(path, "y", ["a"], Task.REGRESSION)
        assert data.n == 2
        assert data.features[:, 0].tolist() == [1.0, 5.0]

    def test_all_rows_dropped_is_an_error(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("a,y\n,1\n")
        with pytest.raises(EmptyDataError):
            load_csv(path, "y", ["a"], Task.REGRESSION)

    def test_encodings_map_categorical_cells(self, tmp_path):
        path = tmp_path / "cat.csv"
        path.write_text("Sex,y\nmale,0\nfemale,1\n")
        data = load_csv(path, "y", ["Sex"], Task.CLASSIFICATION, encodings={"Sex": {"male": 0, "female": 1}})
        assert data.features[:, 0].tolist() == [0.0, 1.0]

    def test_discrete_mask_inferred(self, tmp_path):
        path = tmp_path / "mix.csv"
        path.write_text("a,b,y\n1,1.5,0\n2,2.5,1\n")
        data = load_csv(path, "y", ["a", "b"], Task.REGRESSION)
        assert data.discrete_mask == (True, False)

    def test_passenger_table_shape(self, titanic_csv):
        data = load_csv_with_schema(titanic_csv, load_schema("titanic"))
        assert data.m == 4
        assert data.task is Task.CLASSIFICATION
        assert data.feature_names == ("Pclass", "Sex", "Age", "SibSp")
        # sex arrives encoded, not as text
        assert set(np.unique(data.features[:, 1])) == {0.0, 1.0}

    def test_housing_table_shape(self, boston_csv):
        data = load_csv_with_schema(boston_csv, load_schema("boston"))
        assert data.n == 506
        assert data.m == 13
        assert data.task is Task.REGRESSION


def test_save_then_load_round_trips_bit_exactly(tmp_path):
    data = generate_linear(13, 12, 3, 4)[0]
    path = tmp_path / "round.csv"
    save_csv(data, path)
    back = load_csv(path, "target", list(data.feature_names), Task.REGRESSION)
    assert np.array_equal(back.features, data.features)
    assert np.array_equal(back.targets, data.targets)


class TestComputeBackground:
    def test_mean_for_continuous(self):
        data = Dataset(np.array([[1.0], [3.0]]), np.zeros(2), ("a",), (False,), Task.REGRESSION)
        assert compute_background(data).values[0] == 2.0

    def test_median_for_discrete(self):
        data = Dataset(np.array([[0.0], [0.0], [1.0]]), np.zeros(3), ("a",), (True,), Task.REGRESSION)
        assert compute_background(data).values[0] == 0.0

    def test_even_count_takes_lower_middle(self):
        data = Dataset(np.array([[1.0], [2.0], [3.0], [4.0]]), np.zeros(4), ("a",), (True,), Task.REGRESSION)
        assert compute_background(data).values[0] == 2.0

    def test_row_permutation_invariant(self):
        # Medians sort first, so they are exactly order-free; means only up
        # to summation order.
        rng = np.random.default_rng(2)
        features = np.column_stack([rng.standard_normal(9), rng.integers(0, 5, 9).astype(float)])
        data = Dataset(features, np.zeros(9), ("a", "b"), (False, True), Task.REGRESSION)
        shuffled = data.subset(rng.permutation(9))
        a, b = compute_background(data).values, compute_background(shuffled).values
        assert a[1] == b[1]
        assert a[0] == pytest.approx(b[0], abs=1e-12)


class TestSplitShuffle:
    def test_exact_halving(self):
        data = generate_linear(1, 10, 1, 2)[0]
        train, test = split_shuffle(data, 0, 0.5)
        assert train.n == 5 and test.n == 5

    def test_same_seed_identical(self):
        data = generate_linear(1, 20, 1, 2)[0]
        a = split_shuffle(data, 4, 0.3)
        b = split_shuffle(data, 4, 0.3)
        assert np.array_equal(a[0].features, b[0].features)
        assert np.array_equal(a[1].features, b[1].features)

    def test_partition_preserves_rows(self):
        data = generate_linear(6, 11, 1, 3)[0]
        train, test = split_shuffle(data, 8, 0.4)
        merged = np.vstack([train.features, test.features])
        assert merged.shape == data.features.shape
        assert np.array_equal(np.sort(merged, axis=0), np.sort(np.asarray(data.features), axis=0))

    def test_half_of_506_rows_is_253(self, boston_csv):
        data = load_csv_with_schema(boston_csv, load_schema("boston"))
        _, test = split_shuffle(data, 0, 0.5)
        assert test.n == 253

    def test_empty_split_rejected(self):
        data = generate_linear(1, 2, 1, 2)[0]
        with pytest.raises(DataError):
            split_shuffle(data, 0, 0.1)


def test_unknown_schema_name():
    with pytest.raises(DataError):
        load_schema("cifar")


def test_background_requires_values():
    with pytest.raises(DataError):
        Background(np.array([]))
