"""Local feature attributions of a black-box predictor against one background input.

All methods answer the same question: how much of f(x) - f(b) belongs to each
feature value. Occlusion charges feature i the output change when i alone is
reverted to the background; the Shapley variants average that change over
orderings in which features become known one by one.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .data import Background, LinearGroundTruth, Link

MAX_EXACT_FEATURES = 10
DEFAULT_ORDERINGS_PER_FEATURE = 20


class AttributionError(Exception):
    pass


@dataclass(frozen=True)
class Attribution:
    """Per-feature scores; ``available[i]`` is False where no value was assigned."""

    values: np.ndarray
    available: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        available = np.array(self.available, dtype=bool)
        if values.ndim != 1 or available.shape != values.shape:
            raise AttributionError("values and available must be equal-length vectors")
        values.setflags(write=False)
        available.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "available", available)

    @classmethod
    def full(cls, values: Sequence[float]) -> "Attribution":
        values = np.asarray(values, dtype=float)
        return cls(values, np.ones(values.shape[0], dtype=bool))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def is_full(self) -> bool:
        return bool(self.available.all())

    def as_map(self) -> dict[int, float]:
        return {int(i): float(self.values[i]) for i in np.nonzero(self.available)[0]}


def _check_dims(model, x: np.ndarray, b: Background) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise AttributionError(f"x must be a vector, got shape {x.shape}")
    if b.m != x.shape[0]:
        raise AttributionError(f"background has {b.m} entries but x has {x.shape[0]}")
    model_m = getattr(model, "m", x.shape[0])
    if model_m != x.shape[0]:
        raise AttributionError(f"model expects {model_m} features but x has {x.shape[0]}")
    return x


def _masked_inputs(x: np.ndarray, b: Background, keep_masks: Iterable[int]) -> np.ndarray:
    """Rows mixing x and b: bit i set in the mask means feature i keeps its x value."""
    masks = np.fromiter(keep_masks, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(x.shape[0])) & 1
    return np.where(bits.astype(bool), x, b.values)


def occlusion(model, x: np.ndarray, b: Background) -> Attribution:
    """values[i] = f(x) - f(x with feature i reverted to the background)."""
    x = _check_dims(model, x, b)
    m = x.shape[0]
    full_mask = (1 << m) - 1
    rows = _masked_inputs(x, b, [full_mask] + [full_mask ^ (1 << i) for i in range(m)])
    outputs = model.predict_batch(rows)
    return Attribution.full(outputs[0] - outputs[1:])


def subset_attribution(model, x: np.ndarray, b: Background, i: int, s: Sequence[int]) -> float:
    """Output change when feature i becomes known after the features in s."""
    x = _check_dims(model, x, b)
    subset = set(int(j) for j in s)
    if i in subset:
        raise AttributionError(f"feature {i} must not be in the conditioning subset")
    if not 0 <= i < x.shape[0] or any(not 0 <= j < x.shape[0] for j in subset):
        raise AttributionError("feature index out of range")
    mask = sum(1 << j for j in subset)
    outputs = model.predict_batch(_masked_inputs(x, b, [mask | (1 << i), mask]))
    return float(outputs[0] - outputs[1])


def _ordering_attribution(model, x: np.ndarray, b: Background, orderings: Sequence[Sequence[int]]) -> Attribution:
    """Average marginal contribution of each feature over explicit orderings."""
    m = x.shape[0]
    prefix_masks: list[list[int]] = []
    needed: set[int] = {0}
    for p in orderings:
        masks = [0]
        acc = 0
        for j in p:
            acc |= 1 << int(j)
            masks.append(acc)
        prefix_masks.append(masks)
        needed.update(masks)
    unique = sorted(needed)
    outputs = model.predict_batch(_masked_inputs(x, b, unique))
    value = dict(zip(unique, outputs))
    totals = np.zeros(m)
    for p, masks in zip(orderings, prefix_masks):
        for step, j in enumerate(p):
            totals[int(j)] += value[masks[step + 1]] - value[masks[step]]
    return Attribution.full(totals / len(orderings))


def shap_permutation(model, x: np.ndarray, b: Background, n_perms: int, rng: np.random.Generator) -> Attribution:
    """Shapley estimate from n_perms uniformly sampled feature orderings."""
    x = _check_dims(model, x, b)
    if n_perms < 1:
        raise AttributionError("n_perms must be at least 1")
    orderings = [rng.permutation(x.shape[0]) for _ in range(n_perms)]
    return _ordering_attribution(model, x, b, orderings)


def shap_enumeration(model, x: np.ndarray, b: Background) -> Attribution:
    """Shapley values by brute-force average over every feature ordering."""
    x = _check_dims(model, x, b)
    m = x.shape[0]
    if m > MAX_EXACT_FEATURES:
        raise AttributionError(f"enumeration is limited to {MAX_EXACT_FEATURES} features, got {m}")
    return _ordering_attribution(model, x, b, list(itertools.permutations(range(m))))


def shap_exact(model, x: np.ndarray, b: Background) -> Attribution:
    """Exact Shapley values via the subset-weighted sum over all 2^m feature subsets."""
    x = _check_dims(model, x, b)
    m = x.shape[0]
    if m > MAX_EXACT_FEATURES:
        raise AttributionError(f"exact values are limited to {MAX_EXACT_FEATURES} features, got {m}")
    outputs = model.predict_batch(_masked_inputs(x, b, range(1 << m)))
    fact = math.factorial
    weight = [fact(size) * fact(m - 1 - size) / fact(m) for size in range(m)]
    values = np.zeros(m)
    for mask in range(1 << m):
        size = bin(mask).count("1")
        for i in range(m):
            bit = 1 << i
            if mask & bit:
                continue
            values[i] += weight[size] * (outputs[mask | bit] - outputs[mask])
    return Attribution.full(values)


def default_n_perms(m: int) -> int:
    return DEFAULT_ORDERINGS_PER_FEATURE * m


def linear_closed_form(gt: LinearGroundTruth, x: np.ndarray, b: Background) -> Attribution:
    """For affine functions every method above collapses to w_i * (x_i - b_i)."""
    if gt.link is not Link.IDENTITY:
        raise AttributionError("closed form requires an identity link")
    x = np.asarray(x, dtype=float)
    if x.shape[0] != gt.m or b.m != gt.m:
        raise AttributionError("dimension mismatch")
    return Attribution.full(gt.weights * (x - b.values))
