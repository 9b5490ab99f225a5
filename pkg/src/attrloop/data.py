"""Tabular data model, synthetic generators, CSV ingestion and backgrounds."""
from __future__ import annotations

import csv
import enum
import json
import logging
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

log = logging.getLogger(__name__)

_NA_MARKERS = {"", "na", "nan", "n/a", "null", "?"}
_BALANCE_RETRIES = 100


class Task(enum.Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


class DataError(Exception):
    """Base class for dataset construction and ingestion failures."""


class MissingFileError(DataError):
    pass


class MissingColumnError(DataError):
    pass


class NonNumericCellError(DataError):
    pass


class EmptyDataError(DataError):
    pass


def heaviside(z: float) -> float:
    """Step function used for thresholded targets; H(0) is 1 by convention."""
    return 1.0 if z >= 0.0 else 0.0


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix with targets and per-feature metadata.

    ``discrete_mask[i]`` marks columns whose values are all integral; such
    columns get a median background instead of a mean.
    """

    features: np.ndarray
    targets: np.ndarray
    feature_names: tuple[str, ...]
    discrete_mask: tuple[bool, ...]
    task: Task

    def __post_init__(self) -> None:
        features = _frozen(self.features)
        targets = _frozen(self.targets)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "discrete_mask", tuple(bool(b) for b in self.discrete_mask))
        if features.ndim != 2 or features.shape[0] < 1 or features.shape[1] < 1:
            raise DataError(f"features must be a nonempty 2-d matrix, got shape {features.shape}")
        n, m = features.shape
        if targets.shape != (n,):
            raise DataError(f"targets must have length {n}, got shape {targets.shape}")
        if len(self.feature_names) != m or len(self.discrete_mask) != m:
            raise DataError("feature_names and discrete_mask must have one entry per column")
        if self.task is Task.CLASSIFICATION and not np.all(np.isin(targets, (0.0, 1.0))):
            raise DataError("classification targets must all be 0 or 1")
        for i, discrete in enumerate(self.discrete_mask):
            if discrete and not np.all(features[:, i] == np.round(features[:, i])):
                raise DataError(f"column {self.feature_names[i]} is flagged discrete but holds non-integral values")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def m(self) -> int:
        return self.features.shape[1]

    def subset(self, indices: Sequence[int]) -> "Dataset":
        idx = np.asarray(indices, dtype=int)
        return Dataset(self.features[idx], self.targets[idx], self.feature_names, self.discrete_mask, self.task)

    def with_targets(self, targets: np.ndarray) -> "Dataset":
        return Dataset(self.features, targets, self.feature_names, self.discrete_mask, self.task)


@dataclass(frozen=True)
class Background:
    """Reference input supplying values for occluded features."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = _frozen(self.values)
        if values.ndim != 1 or values.shape[0] < 1:
            raise DataError("background must be a nonempty vector")
        object.__setattr__(self, "values", values)

    @property
    def m(self) -> int:
        return self.values.shape[0]


class Link(enum.Enum):
    IDENTITY = "identity"
    HEAVISIDE = "heaviside"


@dataclass(frozen=True)
class LinearGroundTruth:
    """Generating affine function, optionally thresholded into class labels."""

    weights: np.ndarray
    intercept: float
    link: Link = Link.IDENTITY

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", _frozen(self.weights))
        object.__setattr__(self, "intercept", float(self.intercept))

    @property
    def m(self) -> int:
        return self.weights.shape[0]

    def score(self, x: np.ndarray) -> float:
        return float(np.dot(self.weights, np.asarray(x, dtype=float)) + self.intercept)

    def __call__(self, x: np.ndarray) -> float:
        s = self.score(x)
        return heaviside(s) if self.link is Link.HEAVISIDE else s

    def score_batch(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.weights + self.intercept

    def batch(self, X: np.ndarray) -> np.ndarray:
        s = self.score_batch(X)
        if self.link is Link.HEAVISIDE:
            return np.where(s >= 0.0, 1.0, 0.0)
        return s


def _feature_names(m: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(m))


def generate_linear(seed: int, n_train: int, n_test: int, m: int) -> tuple[Dataset, Dataset, LinearGroundTruth]:
    """Noiseless regression data from a random affine function.

    Coefficients and intercept are uniform on [-1, 1], features are i.i.d.
    standard normal; identical seeds reproduce identical datasets.
    """
    if min(n_train, n_test, m) < 1:
        raise DataError("n_train, n_test and m must all be at least 1")
    rng = np.random.default_rng(seed)
    weights = rng.uniform(-1.0, 1.0, size=m)
    intercept = float(rng.uniform(-1.0, 1.0))
    x_train = rng.standard_normal((n_train, m))
    x_test = rng.standard_normal((n_test, m))
    gt = LinearGroundTruth(weights, intercept, Link.IDENTITY)
    names = _feature_names(m)
    mask = (False,) * m
    train = Dataset(x_train, gt.batch(x_train), names, mask, Task.REGRESSION)
    test = Dataset(x_test, gt.batch(x_test), names, mask, Task.REGRESSION)
    return train, test, gt


def generate_logistic(seed: int, n_train: int, n_test: int, m: int) -> tuple[Dataset, Dataset, LinearGroundTruth]:
    """Binary labels from a thresholded random affine function.

    The intercept is redrawn (up to a bounded number of retries) until both
    splits contain both classes, since downstream training needs two classes.
    """
    if min(n_train, n_test, m) < 1:
        raise DataError("n_train, n_test and m must all be at least 1")
    rng = np.random.default_rng(seed)
    weights = rng.uniform(-1.0, 1.0, size=m)
    intercept = float(rng.uniform(-1.0, 1.0))
    x_train = rng.standard_normal((n_train, m))
    x_test = rng.standard_normal((n_test, m))
    for _ in range(_BALANCE_RETRIES):
        gt = LinearGroundTruth(weights, intercept, Link.HEAVISIDE)
        y_train = gt.batch(x_train)
        y_test = gt.batch(x_test)
        if 0.0 < y_train.mean() < 1.0 and 0.0 < y_test.mean() < 1.0:
            names = _feature_names(m)
            mask = (False,) * m
            train = Dataset(x_train, y_train, names, mask, Task.CLASSIFICATION)
            test = Dataset(x_test, y_test, names, mask, Task.CLASSIFICATION)
            return train, test, gt
        intercept = float(rng.uniform(-1.0, 1.0))
    raise DataError(f"could not find a class-balanced intercept in {_BALANCE_RETRIES} tries for seed {seed}")


def load_csv(
    path: str | Path,
    target_column: str,
    feature_columns: Sequence[str],
    task: Task,
    encodings: Mapping[str, Mapping[str, float]] | None = None,
) -> Dataset:
    """Read the named columns from a headered CSV file into a Dataset.

    Rows with a missing value in any selected column are dropped (and the
    drop count logged). ``encodings`` maps categorical cell text to numbers
    per column, e.g. ``{"Sex": {"male": 0, "female": 1}}``.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingFileError(f"no such file: {path}")
    encodings = encodings or {}
    wanted = list(feature_columns) + [target_column]
    rows: list[list[float]] = []
    dropped = 0
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in wanted if c not in header]
        if missing:
            raise MissingColumnError(f"columns {missing} not in header of {path}")
        for lineno, record in enumerate(reader, start=2):
            values = []
            skip = False
            for col in wanted:
                cell = (record[col] or "").strip()
                if cell.lower() in _NA_MARKERS:
                    skip = True
                    break
                mapping = encodings.get(col)
                if mapping is not None and cell in mapping:
                    values.append(float(mapping[cell]))
                    continue
                try:
                    values.append(float(cell))
                except ValueError:
                    raise NonNumericCellError(f"{path}:{lineno}: column {col!r} has non-numeric cell {cell!r}") from None
            if skip:
                dropped += 1
                continue
            rows.append(values)
    if dropped:
        log.info("dropped %d rows with missing values while reading %s", dropped, path)
    if not rows:
        raise EmptyDataError(f"no usable rows in {path}")
    table = np.asarray(rows, dtype=float)
    features = table[:, :-1]
    targets = table[:, -1]
    mask = tuple(bool(np.all(features[:, i] == np.round(features[:, i]))) for i in range(features.shape[1]))
    return Dataset(features, targets, tuple(feature_columns), mask, task)


def save_csv(data: Dataset, path: str | Path, target_column: str = "target") -> None:
    """Write a Dataset back to CSV; floats use repr so a reload is bit-exact."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(data.feature_names) + [target_column])
        for row, y in zip(data.features, data.targets):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(y))])


def compute_background(data: Dataset) -> Background:
    """Column means, except the lower median for discrete columns.

    The lower-of-two-middles median keeps discrete backgrounds integral for
    even row counts.
    """
    values = np.empty(data.m)
    for i in range(data.m):
        col = data.features[:, i]
        if data.discrete_mask[i]:
            values[i] = np.sort(col)[(data.n - 1) // 2]
        else:
            values[i] = col.mean()
    return Background(values)


def split_shuffle(data: Dataset, seed: int, test_fraction: float) -> tuple[Dataset, Dataset]:
    """Deterministic shuffled split into (train, test); both parts nonempty."""
    if not 0.0 < test_fraction < 1.0:
        raise DataError(f"test_fraction must be in (0, 1), got {test_fraction}")
    n_test = int(data.n * test_fraction)
    if n_test < 1 or data.n - n_test < 1:
        raise DataError(f"fraction {test_fraction} yields an empty split for {data.n} rows")
    perm = np.random.default_rng(seed).permutation(data.n)
    return data.subset(perm[n_test:]), data.subset(perm[:n_test])


def load_schema(name: str) -> dict:
    """Bundled CSV column schema (boston or titanic): roles, encodings, source URL."""
    try:
        text = resources.files("attrloop.schemas").joinpath(f"{name}.json").read_text(encoding="utf-8")
    except FileNotFoundError:
        raise DataError(f"no bundled schema named {name!r}") from None
    return json.loads(text)


def load_csv_with_schema(path: str | Path, schema: Mapping) -> Dataset:
    return load_csv(
        path,
        target_column=schema["target"],
        feature_columns=schema["features"],
        task=Task(schema["task"]),
        encodings=schema.get("encodings"),
    )
