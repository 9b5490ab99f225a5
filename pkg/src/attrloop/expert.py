"""Simulated feedback providers: a ground-truth model and hand-written rules.

The ground-truth expert answers every query with the oracle's own label and
attribution, an upper bound on what a perfectly informed human could supply.
The rule expert mimics a person who explains survival predictions on the
passenger table from domain knowledge alone.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import attribution as attr
from .attribution import Attribution
from .augmentation import Correction
from .data import Background


class ExpertError(Exception):
    pass


class AttributionMethod(enum.Enum):
    OCCLUSION = "occlusion"
    SHAP = "shap"


class ExpertKind(enum.Enum):
    GROUND_TRUTH_MODEL = "ground_truth_model"
    PASSENGER_RULES = "passenger_rules"


@dataclass(frozen=True)
class Expert:
    kind: ExpertKind
    oracle: Optional[object] = None
    method: AttributionMethod = AttributionMethod.OCCLUSION
    n_perms: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind is ExpertKind.GROUND_TRUTH_MODEL and self.oracle is None:
            raise ExpertError("a ground-truth expert needs an oracle model")


def oracle_label(expert: Expert, x: np.ndarray, recorded: Optional[float] = None) -> float:
    """The label the expert would assign: oracle prediction or the recorded one."""
    if expert.kind is ExpertKind.GROUND_TRUTH_MODEL:
        return float(expert.oracle.predict_one(np.asarray(x, dtype=float)))
    if recorded is None:
        raise ExpertError("rule experts relabel nothing; a recorded label is required")
    return float(recorded)


def oracle_attribution(expert: Expert, x: np.ndarray, b: Background, rng: Optional[np.random.Generator] = None) -> Attribution:
    """Full attribution of the oracle model at x, by the configured method."""
    if expert.kind is not ExpertKind.GROUND_TRUTH_MODEL:
        raise ExpertError("only the ground-truth expert computes attributions")
    if expert.method is AttributionMethod.OCCLUSION:
        return attr.occlusion(expert.oracle, x, b)
    if b.m <= attr.MAX_EXACT_FEATURES:
        return attr.shap_exact(expert.oracle, x, b)
    if rng is None:
        raise ExpertError("sampled orderings need a generator when the feature count is large")
    n_perms = expert.n_perms if expert.n_perms is not None else attr.default_n_perms(b.m)
    return attr.shap_permutation(expert.oracle, x, b, n_perms, rng)


def least_important_feature(r: Attribution) -> int:
    """Index of the smallest-|score| feature, lowest index winning ties."""
    if not r.is_full:
        raise ExpertError("ranking features needs a score for each of them")
    return int(np.argmin(np.abs(r.values)))


# Passenger table layout: class, sex, age, siblings-and-spouses.
PCLASS, SEX, AGE, SIBSP = 0, 1, 2, 3
FEMALE = 1.0
CHILD_AGE_LIMIT = 12.0


class RuleFeedback(enum.Enum):
    ATTRIBUTION = "attribution"
    IRRELEVANCE = "irrelevance"


def passenger_rules(x: np.ndarray, y: float, feedback: RuleFeedback) -> Correction:
    """Rule-of-thumb feedback on a survival prediction: women and children first.

    A surviving woman owes the outcome to her sex, a surviving child to its
    age. In attribution mode the responsible feature gets a score of one; in
    irrelevance mode every other feature is marked as not mattering. All other
    passengers get label-only feedback.
    """
    x = np.asarray(x, dtype=float)
    if x.shape != (4,):
        raise ExpertError(f"expected the 4-column passenger layout, got shape {x.shape}")
    y = float(y)
    responsible: Optional[int] = None
    if y == 1.0 and x[SEX] == FEMALE:
        responsible = SEX
    elif y == 1.0 and x[AGE] < CHILD_AGE_LIMIT:
        responsible = AGE
    if responsible is None:
        return Correction(label=y)
    if feedback is RuleFeedback.ATTRIBUTION:
        return Correction(label=y, attributions={responsible: 1.0})
    return Correction(label=y, irrelevant=frozenset(range(4)) - {responsible})
