"""The correction loop: query, collect feedback, augment, retrain, evaluate.

``LoopState`` is the single source of truth for loop semantics. Batch
experiments (``run``) and the HTTP service drive the same state object, so a
scripted client talking to the service reproduces an in-process run bit for
bit. Randomness is split into independent streams (initial labels, query
selection, expert sampling, augmentation, display) derived from one seed, and
the augmentation stream is spawned per queried sample, so feedback may arrive
in any order without changing the outcome.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, replace
from typing import Optional, Sequence, Union

import numpy as np

from . import models
from .attribution import Attribution
from .augmentation import (
    AugmentedBatch,
    Correction,
    augment_baseline,
    augment_counterexamples,
    augment_occlusion,
    augment_shap,
)
from .data import Background, Dataset, Task, compute_background
from .expert import (
    AttributionMethod,
    Expert,
    ExpertKind,
    RuleFeedback,
    least_important_feature,
    oracle_attribution,
    oracle_label,
    passenger_rules,
)
from .models import ModelSpec


class EngineError(Exception):
    pass


class UnknownSampleError(EngineError):
    pass


class DuplicateCorrectionError(EngineError):
    pass


class RetrainBlockedError(EngineError):
    pass


class PoolExhaustedError(EngineError):
    pass


class StrategyKind(enum.Enum):
    BASELINE = "baseline"
    CAIPI = "caipi"
    CAIPI_SINGLE = "caipi_single"
    INTERACTIVE_OCCLUSION = "interactive_occlusion"
    INTERACTIVE_SHAP = "interactive_shap"
    INTERACTIVE_SINGLE_OCCLUSION = "interactive_single_occlusion"
    INTERACTIVE_SINGLE_SHAP = "interactive_single_shap"
    EXPERT_OCCLUSION = "expert_occlusion"
    EXPERT_CAIPI = "expert_caipi"


_SHAP_STRATEGIES = frozenset({StrategyKind.INTERACTIVE_SHAP, StrategyKind.INTERACTIVE_SINGLE_SHAP})
_RULE_STRATEGIES = frozenset({StrategyKind.EXPERT_OCCLUSION, StrategyKind.EXPERT_CAIPI})
_IRRELEVANCE_STRATEGIES = frozenset({StrategyKind.CAIPI, StrategyKind.CAIPI_SINGLE, StrategyKind.EXPERT_CAIPI})

Feedback = Union[None, Correction, Attribution]


@dataclass(frozen=True)
class LoopConfig:
    strategy: StrategyKind
    model: ModelSpec
    expert: Expert
    query_size: int = 1
    iterations: int = 30
    k: Optional[int] = None
    background: Optional[Background] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.query_size < 1:
            raise EngineError("query_size must be at least 1")
        if self.iterations < 0:
            raise EngineError("iterations must be nonnegative")
        if self.k is not None and self.k < 1:
            raise EngineError("k must be at least 1")


@dataclass(frozen=True)
class RunResult:
    strategy: str
    seed: int
    metric: tuple[float, ...]
    cumulative_samples: tuple[int, ...]
    tag: str = ""


@dataclass(frozen=True)
class QueryItem:
    sample_id: int
    x: np.ndarray
    recorded: float


_SKIPPED = object()


@dataclass
class _Slot:
    item: QueryItem
    expert_rng: np.random.Generator
    augment_rng: np.random.Generator
    label: Optional[float] = None
    batch: object = None


def evaluate(model, test: Dataset) -> float:
    """Mean squared error for regression, accuracy for classification."""
    predictions = model.predict_batch(test.features)
    if test.task is Task.REGRESSION:
        return float(np.mean((predictions - test.targets) ** 2))
    return float(np.mean(predictions == test.targets))


def snap_to_unit(value: float) -> float:
    """Nearest of -1, 0, 1; halves round away from zero."""
    if value >= 0.5:
        return 1.0
    if value <= -0.5:
        return -1.0
    return 0.0


def expert_feedback(
    strategy: StrategyKind,
    expert: Expert,
    x: np.ndarray,
    recorded: float,
    background: Background,
    task: Task,
    expert_rng: Optional[np.random.Generator] = None,
) -> tuple[float, Feedback]:
    """Label and feedback object the simulated expert returns for one query."""
    label = oracle_label(expert, x, recorded)
    if strategy is StrategyKind.BASELINE:
        return label, None
    if expert.kind is ExpertKind.PASSENGER_RULES:
        if strategy not in _RULE_STRATEGIES:
            raise EngineError(f"strategy {strategy.value} needs a ground-truth expert")
        mode = RuleFeedback.IRRELEVANCE if strategy is StrategyKind.EXPERT_CAIPI else RuleFeedback.ATTRIBUTION
        return label, passenger_rules(x, label, mode)
    if strategy in _RULE_STRATEGIES:
        raise EngineError(f"strategy {strategy.value} needs the rule expert")
    method = AttributionMethod.SHAP if strategy in _SHAP_STRATEGIES else AttributionMethod.OCCLUSION
    r = oracle_attribution(replace(expert, method=method), x, background, expert_rng)
    if strategy is StrategyKind.INTERACTIVE_OCCLUSION:
        return label, Correction(label, attributions=r.as_map())
    if strategy is StrategyKind.INTERACTIVE_SHAP:
        return label, r
    if strategy is StrategyKind.INTERACTIVE_SINGLE_OCCLUSION or strategy is StrategyKind.INTERACTIVE_SINGLE_SHAP:
        u = least_important_feature(r)
        value = float(r.values[u])
        # Class outputs only admit whole-unit scores, mirroring what a person
        # could state about a 0/1 prediction.
        if task is Task.CLASSIFICATION:
            value = snap_to_unit(value)
        return label, Correction(label, attributions={u: value})
    if strategy is StrategyKind.CAIPI:
        zero = frozenset(int(i) for i in np.nonzero(r.values == 0.0)[0])
        return label, Correction(label, irrelevant=zero)
    if strategy is StrategyKind.CAIPI_SINGLE:
        u = least_important_feature(r)
        return label, Correction(label, irrelevant=frozenset({u}))
    raise EngineError(f"no feedback rule for strategy {strategy.value}")


def feedback_from_correction(strategy: StrategyKind, correction: Correction, m: int) -> Feedback:
    """Interpret a client-supplied correction under the session's strategy."""
    if strategy is StrategyKind.BASELINE:
        if correction.attributions or correction.irrelevant:
            raise EngineError("the baseline strategy accepts label-only feedback")
        return None
    if strategy in _IRRELEVANCE_STRATEGIES:
        if correction.attributions:
            raise EngineError(f"strategy {strategy.value} takes an irrelevance set, not attributions")
        return correction
    if correction.irrelevant:
        raise EngineError(f"strategy {strategy.value} takes attributions, not an irrelevance set")
    if strategy is StrategyKind.INTERACTIVE_SHAP and correction.attributions:
        if sorted(correction.attributions) != list(range(m)):
            raise EngineError("this strategy needs a corrected score for every feature")
        return Attribution.full([correction.attributions[i] for i in range(m)])
    return correction


def build_batch(
    strategy: StrategyKind,
    x: np.ndarray,
    label: float,
    feedback: Feedback,
    background: Background,
    k: int,
    augment_rng: np.random.Generator,
    task: Task,
) -> AugmentedBatch:
    """Expand one corrected sample into its fixed-size training batch."""
    if feedback is None or (isinstance(feedback, Correction) and not feedback.attributions and not feedback.irrelevant):
        return augment_baseline(x, label, task)
    if isinstance(feedback, Attribution):
        if strategy is not StrategyKind.INTERACTIVE_SHAP:
            raise EngineError(f"strategy {strategy.value} does not take a full attribution")
        return augment_shap(x, label, feedback, background, k, augment_rng, task)
    if feedback.irrelevant:
        return augment_counterexamples(x, label, feedback, background, task)
    return augment_occlusion(x, label, feedback, background, task)


class LoopState:
    """One loop instance: labeled set, current model, pending query, history."""

    def __init__(self, config: LoopConfig, pool: Dataset, test: Dataset):
        if pool.task is not test.task:
            raise EngineError("pool and testing data disagree on the task")
        if pool.m != test.m:
            raise EngineError("pool and testing data disagree on the feature count")
        self.config = config
        self.pool = pool
        self.test = test
        self.task = pool.task
        self.m = pool.m
        self.k = config.k if config.k is not None else pool.m
        self.background = config.background if config.background is not None else compute_background(pool)
        if self.background.m != pool.m:
            raise EngineError(f"background has {self.background.m} entries but the pool has {pool.m} features")
        root = np.random.SeedSequence(config.seed)
        init_ss, query_ss, expert_ss, augment_ss, display_ss = root.spawn(5)
        self._query_rng = np.random.default_rng(query_ss)
        self._expert_ss = expert_ss
        self._augment_ss = augment_ss
        self.display_rng = np.random.default_rng(display_ss)
        self._rows: list[np.ndarray] = []
        self._targets: list[float] = []
        self.remaining = list(range(pool.n))
        self._next_sample_id = 0
        self._pending: Optional[dict[int, _Slot]] = None
        self._pending_order: list[int] = []
        for index in self._initial_indices(np.random.default_rng(init_ss)):
            self.remaining.remove(index)
            self._rows.append(np.array(pool.features[index]))
            self._targets.append(float(pool.targets[index]))
        self.model = self._fit()
        self.iteration = 0
        self.metrics: list[float] = [evaluate(self.model, test)]
        self.cumulative: list[int] = [len(self._targets)]

    def _initial_indices(self, rng: np.random.Generator) -> list[int]:
        # Regression starts from the untrained model; classification needs one
        # sample of each class before the first fit can succeed.
        if self.task is Task.REGRESSION:
            return []
        order = rng.permutation(self.pool.n)
        first = int(order[0])
        for j in order[1:]:
            if self.pool.targets[int(j)] != self.pool.targets[first]:
                return [first, int(j)]
        raise EngineError("the pool holds a single class; no initial pair exists")

    def _fit(self):
        if not self._targets:
            return models.untrained(self.config.model, self.task, self.m)
        train = Dataset(
            np.array(self._rows),
            np.array(self._targets),
            self.pool.feature_names,
            self.pool.discrete_mask,
            self.task,
        )
        return models.fit(self.config.model, train)

    @property
    def has_pending(self) -> bool:
        return self._pending is not None

    def pending_items(self) -> list[QueryItem]:
        """Queried samples still waiting for feedback, in query order."""
        if self._pending is None:
            return []
        return [self._pending[sid].item for sid in self._pending_order if self._pending[sid].batch is None]

    def draw_query(self) -> list[QueryItem]:
        if self._pending is not None:
            raise RetrainBlockedError("the previous query has not been retrained yet")
        if not self.remaining:
            raise PoolExhaustedError("every pool sample has been queried")
        q = min(self.config.query_size, len(self.remaining))
        picks = self._query_rng.choice(len(self.remaining), size=q, replace=False)
        chosen = [self.remaining[int(p)] for p in picks]
        taken = set(int(p) for p in picks)
        self.remaining = [r for pos, r in enumerate(self.remaining) if pos not in taken]
        expert_children = self._expert_ss.spawn(q)
        augment_children = self._augment_ss.spawn(q)
        self._pending = {}
        self._pending_order = []
        items = []
        for pos, index in enumerate(chosen):
            item = QueryItem(
                sample_id=self._next_sample_id,
                x=np.array(self.pool.features[index]),
                recorded=float(self.pool.targets[index]),
            )
            self._next_sample_id += 1
            self._pending[item.sample_id] = _Slot(
                item=item,
                expert_rng=np.random.default_rng(expert_children[pos]),
                augment_rng=np.random.default_rng(augment_children[pos]),
            )
            self._pending_order.append(item.sample_id)
            items.append(item)
        return items

    def _slot(self, sample_id: int) -> _Slot:
        if self._pending is None or sample_id not in self._pending:
            raise UnknownSampleError(f"sample {sample_id} is not part of the pending query")
        return self._pending[sample_id]

    def expert_rng(self, sample_id: int) -> np.random.Generator:
        return self._slot(sample_id).expert_rng

    def recorded_label(self, sample_id: int) -> float:
        return self._slot(sample_id).item.recorded

    def submit(self, sample_id: int, label: float, feedback: Feedback) -> AugmentedBatch:
        slot = self._slot(sample_id)
        if slot.batch is not None:
            raise DuplicateCorrectionError(f"sample {sample_id} already has feedback")
        label = float(label)
        if self.task is Task.CLASSIFICATION and label not in (0.0, 1.0):
            raise EngineError(f"classification label must be 0 or 1, got {label}")
        batch = build_batch(
            self.config.strategy, slot.item.x, label, feedback, self.background, self.k, slot.augment_rng, self.task
        )
        slot.label = label
        slot.batch = batch
        return batch

    def skip(self, sample_id: int) -> None:
        slot = self._slot(sample_id)
        if slot.batch is not None:
            raise DuplicateCorrectionError(f"sample {sample_id} already has feedback")
        slot.batch = _SKIPPED

    def retrain(self) -> float:
        if self._pending is None:
            raise RetrainBlockedError("draw a query before retraining")
        waiting = [sid for sid in self._pending_order if self._pending[sid].batch is None]
        if waiting:
            raise RetrainBlockedError(f"samples {waiting} still need feedback or a skip")
        for sid in self._pending_order:
            slot = self._pending[sid]
            if slot.batch is _SKIPPED:
                continue
            self._rows.append(np.array(slot.item.x))
            self._targets.append(float(slot.label))
            for row, target in zip(slot.batch.features, slot.batch.targets):
                self._rows.append(np.array(row))
                self._targets.append(float(target))
        self._pending = None
        self._pending_order = []
        self.model = self._fit()
        self.iteration += 1
        metric = evaluate(self.model, self.test)
        self.metrics.append(metric)
        self.cumulative.append(len(self._targets))
        return metric


def run(config: LoopConfig, pool: Dataset, test: Dataset, tag: str = "") -> RunResult:
    """Simulate the full loop with the configured expert answering every query."""
    state = LoopState(config, pool, test)
    for _ in range(config.iterations):
        for item in state.draw_query():
            label, feedback = expert_feedback(
                config.strategy,
                config.expert,
                item.x,
                item.recorded,
                state.background,
                state.task,
                state.expert_rng(item.sample_id),
            )
            state.submit(item.sample_id, label, feedback)
        state.retrain()
    return RunResult(
        strategy=config.strategy.value,
        seed=config.seed,
        tag=tag,
        metric=tuple(state.metrics),
        cumulative_samples=tuple(state.cumulative),
    )


@dataclass(frozen=True)
class RunJob:
    config: LoopConfig
    pool: Dataset
    test: Dataset
    tag: str = ""


def run_job(job: RunJob) -> RunResult:
    return run(job.config, job.pool, job.test, job.tag)


def run_matrix(jobs: Sequence[RunJob], n_jobs: int = 1) -> list[RunResult]:
    """Execute jobs, optionally across processes; result order follows job order."""
    if n_jobs < 1:
        raise EngineError("n_jobs must be at least 1")
    if n_jobs == 1 or len(jobs) <= 1:
        return [run_job(job) for job in jobs]
    import concurrent.futures
    import multiprocessing

    context = multiprocessing.get_context("spawn")
    with concurrent.futures.ProcessPoolExecutor(max_workers=n_jobs, mp_context=context) as pool:
        return list(pool.map(run_job, jobs))


@dataclass(frozen=True)
class AggregateResult:
    results: tuple[RunResult, ...]
    strategies: tuple[str, ...]
    n_points: int
    mean_metric: dict[str, tuple[float, ...]]
    diff_vs_baseline: dict[tuple[str, int], tuple[float, ...]]
    mean_diff_vs_baseline: dict[str, tuple[float, ...]]


def aggregate(results: Sequence[RunResult]) -> AggregateResult:
    """Mean series per strategy plus per-run and mean differences to the baseline.

    Runs pair up by seed, so the baseline must have been run once per seed.
    The ordering is canonical (strategy name, then seed), which makes the
    output independent of the order runs arrive in. The difference is strategy
    minus baseline: above zero favours the strategy for accuracy, below zero
    for squared error.
    """
    if not results:
        raise EngineError("nothing to aggregate")
    lengths = {len(r.metric) for r in results}
    if len(lengths) != 1:
        raise EngineError(f"runs disagree on series length: {sorted(lengths)}")
    n_points = lengths.pop()
    baseline_name = StrategyKind.BASELINE.value
    baselines: dict[int, RunResult] = {}
    for r in results:
        if r.strategy == baseline_name:
            if r.seed in baselines:
                raise EngineError(f"two baseline runs share seed {r.seed}")
            baselines[r.seed] = r
    if not baselines:
        raise EngineError("aggregation needs baseline runs to pair against")
    strategies = tuple(sorted({r.strategy for r in results}))
    ordered: list[RunResult] = []
    mean_metric = {}
    diff_vs_baseline = {}
    mean_diff = {}
    for name in strategies:
        runs = sorted((r for r in results if r.strategy == name), key=lambda r: r.seed)
        seeds = [r.seed for r in runs]
        if len(set(seeds)) != len(seeds):
            raise EngineError(f"two {name} runs share a seed")
        ordered.extend(runs)
        series = np.array([r.metric for r in runs])
        mean_metric[name] = tuple(float(v) for v in series.mean(axis=0))
        diffs = []
        for r in runs:
            if r.seed not in baselines:
                raise EngineError(f"run {name} with seed {r.seed} has no baseline partner")
            diff = np.array(r.metric) - np.array(baselines[r.seed].metric)
            diff_vs_baseline[(name, r.seed)] = tuple(float(v) for v in diff)
            diffs.append(diff)
        mean_diff[name] = tuple(float(v) for v in np.array(diffs).mean(axis=0))
    return AggregateResult(
        results=tuple(ordered),
        strategies=strategies,
        n_points=n_points,
        mean_metric=mean_metric,
        diff_vs_baseline=diff_vs_baseline,
        mean_diff_vs_baseline=mean_diff,
    )
