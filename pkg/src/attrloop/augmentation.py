"""Turning corrected attributions into extra training samples.

Every builder returns a batch of exactly twice the feature count (or twice the
repetition count) so that competing feedback strategies hand the model the same
number of samples per corrected query. Counterfactual rows are interleaved with
copies of the original sample, and short batches are padded with more copies.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .attribution import Attribution
from .data import Background, Task, heaviside


class AugmentationError(Exception):
    pass


class Provenance(enum.Enum):
    ORIGINAL = "original"
    OCCLUSION_COUNTERFACTUAL = "occlusion_counterfactual"
    ORDERING_COUNTERFACTUAL = "ordering_counterfactual"
    IRRELEVANCE_COUNTEREXAMPLE = "irrelevance_counterexample"
    OVERSAMPLE = "oversample"


@dataclass(frozen=True)
class Correction:
    """Feedback on one queried sample.

    ``attributions`` maps feature index to the corrected per-feature score and
    may cover any subset of features. ``irrelevant`` marks features whose value
    did not matter for the label; it is mutually exclusive with attributions.
    """

    label: float
    attributions: Mapping[int, float] = field(default_factory=dict)
    irrelevant: frozenset[int] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "attributions", dict(self.attributions))
        object.__setattr__(self, "irrelevant", frozenset(int(i) for i in self.irrelevant))
        if self.attributions and self.irrelevant:
            raise AugmentationError("a correction carries attributions or an irrelevance set, not both")

    def validate_for(self, task: Task, m: int) -> None:
        for i in list(self.attributions) + list(self.irrelevant):
            if not 0 <= int(i) < m:
                raise AugmentationError(f"feature index {i} out of range for {m} features")
        if task is Task.CLASSIFICATION:
            if float(self.label) not in (0.0, 1.0):
                raise AugmentationError(f"classification label must be 0 or 1, got {self.label}")
            for i, v in self.attributions.items():
                if float(v) not in (-1.0, 0.0, 1.0):
                    raise AugmentationError(f"classification attribution for feature {i} must be -1, 0 or 1, got {v}")


@dataclass(frozen=True)
class AugmentedBatch:
    features: np.ndarray
    targets: np.ndarray
    provenance: tuple[Provenance, ...]

    def __post_init__(self) -> None:
        features = np.array(self.features, dtype=float)
        targets = np.array(self.targets, dtype=float)
        if features.ndim != 2 or targets.shape != (features.shape[0],) or len(self.provenance) != features.shape[0]:
            raise AugmentationError("features, targets and provenance must agree in length")
        features.setflags(write=False)
        targets.setflags(write=False)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)

    @property
    def size(self) -> int:
        return self.features.shape[0]


def heaviside_target(value: float) -> float:
    """Snap a counterfactual class target back onto {0, 1}, splitting at 1/2."""
    return heaviside(float(value) - 0.5)


class _Builder:
    def __init__(self, x: np.ndarray, y: float, task: Task):
        self.x = np.asarray(x, dtype=float)
        self.y = float(y)
        self.task = task
        self.rows: list[np.ndarray] = []
        self.targets: list[float] = []
        self.provenance: list[Provenance] = []

    def counterfactual(self, row: np.ndarray, target: float, tag: Provenance) -> None:
        if self.task is Task.CLASSIFICATION:
            target = heaviside_target(target)
        self.rows.append(row)
        self.targets.append(target)
        self.provenance.append(tag)
        # Each counterfactual is immediately balanced by a copy of the original.
        self.rows.append(self.x.copy())
        self.targets.append(self.y)
        self.provenance.append(Provenance.ORIGINAL)

    def pad_to(self, size: int) -> AugmentedBatch:
        while len(self.rows) < size:
            self.rows.append(self.x.copy())
            self.targets.append(self.y)
            self.provenance.append(Provenance.OVERSAMPLE)
        return AugmentedBatch(np.array(self.rows), np.array(self.targets), tuple(self.provenance))


def _check_inputs(x: np.ndarray, b: Background) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise AugmentationError(f"x must be a vector, got shape {x.shape}")
    if b.m != x.shape[0]:
        raise AugmentationError(f"background has {b.m} entries but x has {x.shape[0]}")
    return x


def augment_occlusion(x: np.ndarray, y: float, correction: Correction, b: Background, task: Task) -> AugmentedBatch:
    """One single-feature counterfactual per corrected attribution, plus copies.

    Reverting feature i to the background should drop the output by the
    corrected score, so the counterfactual row gets the target y - r_i.
    """
    x = _check_inputs(x, b)
    correction.validate_for(task, x.shape[0])
    if not correction.attributions:
        raise AugmentationError("occlusion augmentation needs at least one corrected attribution")
    builder = _Builder(x, y, task)
    for i in sorted(correction.attributions):
        row = x.copy()
        row[i] = b.values[i]
        builder.counterfactual(row, float(y) - float(correction.attributions[i]), Provenance.OCCLUSION_COUNTERFACTUAL)
    return builder.pad_to(2 * x.shape[0])


def augment_shap(x: np.ndarray, y: float, r: Attribution, b: Background, k: int, rng: np.random.Generator, task: Task) -> AugmentedBatch:
    """k prefix counterfactuals from random orderings, each balanced by a copy.

    A random prefix D of a random feature ordering is reverted to the
    background and the target drops by the summed scores of D. With k equal to
    the feature count the batch size matches the occlusion builder's.
    """
    x = _check_inputs(x, b)
    if not r.is_full or r.m != x.shape[0]:
        raise AugmentationError("ordering augmentation needs a score for every feature")
    if k < 1:
        raise AugmentationError("k must be at least 1")
    m = x.shape[0]
    builder = _Builder(x, y, task)
    for _ in range(k):
        order = rng.permutation(m)
        length = int(rng.integers(1, m + 1))
        replaced = order[:length]
        row = x.copy()
        row[replaced] = b.values[replaced]
        builder.counterfactual(row, float(y) - float(r.values[replaced].sum()), Provenance.ORDERING_COUNTERFACTUAL)
    return builder.pad_to(2 * k)


def augment_counterexamples(x: np.ndarray, y: float, correction: Correction, b: Background, task: Task) -> AugmentedBatch:
    """One counterexample per irrelevant feature: revert it, keep the label."""
    x = _check_inputs(x, b)
    correction.validate_for(task, x.shape[0])
    if correction.attributions:
        raise AugmentationError("counterexamples are built from an irrelevance set, not attributions")
    builder = _Builder(x, y, task)
    for i in sorted(correction.irrelevant):
        row = x.copy()
        row[i] = b.values[i]
        builder.counterfactual(row, float(y), Provenance.IRRELEVANCE_COUNTEREXAMPLE)
    return builder.pad_to(2 * x.shape[0])


def augment_baseline(x: np.ndarray, y: float, task: Task) -> AugmentedBatch:
    """Label-only feedback: the sample is simply oversampled to the shared budget."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise AugmentationError(f"x must be a vector, got shape {x.shape}")
    builder = _Builder(x, y, task)
    return builder.pad_to(2 * x.shape[0])
