"""Experiment configuration: the INI grammar, validation, and job construction.

A config file describes one experiment: a dataset, a model, an expert, a list
of feedback strategies, and the loop sizes. ``build_jobs`` expands it into the
full strategy-by-seed matrix; ``single_job`` picks out one cell, which is also
how the HTTP service builds a session, so service runs and batch runs share
every byte of preparation.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import models
from .data import (
    Background,
    Dataset,
    Task,
    compute_background,
    generate_linear,
    generate_logistic,
    load_csv_with_schema,
    load_schema,
    split_shuffle,
)
from .engine import EngineError, LoopConfig, RunJob, StrategyKind
from .expert import Expert, ExpertKind
from .models import GroundTruthPredictor, ModelKind, ModelSpec


class ConfigError(Exception):
    pass


_DATASET_KINDS = ("linear", "logistic", "csv")
_EXPERT_KINDS = ("oracle", "passenger_rules")
_RULE_ONLY = frozenset({StrategyKind.EXPERT_OCCLUSION, StrategyKind.EXPERT_CAIPI})
_ORACLE_BACKED = frozenset(StrategyKind) - _RULE_ONLY - {StrategyKind.BASELINE}


@dataclass(frozen=True)
class DatasetSpec:
    kind: str
    m: int = 0
    n_train: int = 0
    n_test: int = 0
    path: str = ""
    schema: str = ""
    test_fraction: float = 0.5


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    seed: int
    strategies: tuple[StrategyKind, ...]
    iterations: int
    query_size: int
    n_models: int
    n_shuffles: int
    output_dir: str
    dataset: DatasetSpec
    model: ModelSpec
    oracle: Optional[ModelSpec] = None
    expert_kind: str = "oracle"
    n_perms: Optional[int] = None
    k: Optional[int] = None
    background: Optional[tuple[float, ...]] = None


def _section(parser: configparser.ConfigParser, name: str, required: bool = True) -> Optional[dict[str, str]]:
    if not parser.has_section(name):
        if required:
            raise ConfigError(f"missing [{name}] section")
        return None
    return dict(parser.items(name))


def _take(values: dict[str, str], key: str, default: Optional[str] = None) -> Optional[str]:
    if key in values:
        return values.pop(key)
    return default


def _int(raw: str, key: str) -> int:
    try:
        return int(raw)
    except ValueError as exc:
        raise ConfigError(f"{key} must be an integer, got {raw!r}") from exc


def _float(raw: str, key: str) -> float:
    try:
        return float(raw)
    except ValueError as exc:
        raise ConfigError(f"{key} must be a number, got {raw!r}") from exc


def _reject_extras(values: dict[str, str], section: str) -> None:
    if values:
        raise ConfigError(f"unknown keys in [{section}]: {', '.join(sorted(values))}")


def _parse_strategies(raw: str) -> tuple[StrategyKind, ...]:
    tokens = [t.strip() for t in raw.split(",") if t.strip()]
    if not tokens:
        raise ConfigError("strategies must name at least one strategy")
    result = []
    valid = {s.value: s for s in StrategyKind}
    for token in tokens:
        if token not in valid:
            raise ConfigError(f"unknown strategy {token!r}; valid: {', '.join(sorted(valid))}")
        if valid[token] in result:
            raise ConfigError(f"strategy {token!r} is listed twice")
        result.append(valid[token])
    return tuple(result)


def _parse_model(values: dict[str, str], section: str) -> ModelSpec:
    kind_raw = _take(values, "kind")
    if kind_raw is None:
        raise ConfigError(f"[{section}] needs a kind")
    valid = {k.value: k for k in ModelKind}
    if kind_raw not in valid:
        raise ConfigError(f"unknown model kind {kind_raw!r}; valid: {', '.join(sorted(valid))}")
    seed = _int(_take(values, "seed", "0"), f"{section}.seed")
    hyperparameters = {key: _float(raw, f"{section}.{key}") for key, raw in values.items()}
    values.clear()
    try:
        return ModelSpec(valid[kind_raw], hyperparameters=hyperparameters, seed=seed)
    except models.ModelError as exc:
        raise ConfigError(f"[{section}]: {exc}") from exc


def parse_config(text: str) -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"bad INI syntax: {exc}") from exc

    exp = _section(parser, "experiment")
    name = _take(exp, "name")
    if not name:
        raise ConfigError("[experiment] needs a name")
    seed = _int(_take(exp, "seed", "0"), "seed")
    strategies = _parse_strategies(_take(exp, "strategies", ""))
    iterations = _int(_take(exp, "iterations", "30"), "iterations")
    query_size = _int(_take(exp, "query_size", "1"), "query_size")
    n_models = _int(_take(exp, "n_models", "1"), "n_models")
    n_shuffles = _int(_take(exp, "n_shuffles", "1"), "n_shuffles")
    output_dir = _take(exp, "output_dir", f"results/{name}")
    _reject_extras(exp, "experiment")

    ds = _section(parser, "dataset")
    kind = _take(ds, "kind")
    if kind not in _DATASET_KINDS:
        raise ConfigError(f"dataset kind must be one of {', '.join(_DATASET_KINDS)}, got {kind!r}")
    if kind == "csv":
        path = _take(ds, "path")
        schema = _take(ds, "schema")
        if not path or not schema:
            raise ConfigError("a csv dataset needs path and schema")
        test_fraction = _float(_take(ds, "test_fraction", "0.5"), "test_fraction")
        dataset = DatasetSpec(kind="csv", path=path, schema=schema, test_fraction=test_fraction)
    else:
        m = _int(_take(ds, "m", "0"), "m")
        n_train = _int(_take(ds, "n_train", "0"), "n_train")
        n_test = _int(_take(ds, "n_test", "0"), "n_test")
        if m < 1 or n_train < 1 or n_test < 1:
            raise ConfigError("synthetic datasets need positive m, n_train and n_test")
        dataset = DatasetSpec(kind=kind, m=m, n_train=n_train, n_test=n_test)
    _reject_extras(ds, "dataset")

    model = _parse_model(_section(parser, "model"), "model")
    oracle_section = _section(parser, "oracle", required=False)
    oracle = _parse_model(oracle_section, "oracle") if oracle_section is not None else None

    expert_kind = "oracle"
    n_perms = None
    expert_section = _section(parser, "expert", required=False)
    if expert_section is not None:
        expert_kind = _take(expert_section, "kind", "oracle")
        if expert_kind not in _EXPERT_KINDS:
            raise ConfigError(f"expert kind must be one of {', '.join(_EXPERT_KINDS)}, got {expert_kind!r}")
        raw_perms = _take(expert_section, "n_perms")
        n_perms = _int(raw_perms, "n_perms") if raw_perms is not None else None
        _reject_extras(expert_section, "expert")

    k = None
    aug_section = _section(parser, "augmentation", required=False)
    if aug_section is not None:
        raw_k = _take(aug_section, "k")
        k = _int(raw_k, "k") if raw_k is not None else None
        _reject_extras(aug_section, "augmentation")

    background = None
    bg_section = _section(parser, "background", required=False)
    if bg_section is not None:
        raw_values = _take(bg_section, "values")
        if raw_values is None:
            raise ConfigError("[background] needs a values key")
        background = tuple(_float(v.strip(), "background.values") for v in raw_values.split(","))
        _reject_extras(bg_section, "background")

    config = ExperimentConfig(
        name=name,
        seed=seed,
        strategies=strategies,
        iterations=iterations,
        query_size=query_size,
        n_models=n_models,
        n_shuffles=n_shuffles,
        output_dir=output_dir,
        dataset=dataset,
        model=model,
        oracle=oracle,
        expert_kind=expert_kind,
        n_perms=n_perms,
        k=k,
        background=background,
    )
    _validate(config)
    return config


def _validate(cfg: ExperimentConfig) -> None:
    if cfg.iterations < 1:
        raise ConfigError("iterations must be at least 1")
    if cfg.query_size < 1:
        raise ConfigError("query_size must be at least 1")
    if cfg.n_models < 1 or cfg.n_shuffles < 1:
        raise ConfigError("n_models and n_shuffles must be at least 1")
    if cfg.k is not None and cfg.k < 1:
        raise ConfigError("k must be at least 1")
    if cfg.n_perms is not None and cfg.n_perms < 1:
        raise ConfigError("n_perms must be at least 1")
    ds = cfg.dataset
    if ds.kind == "csv":
        if not 0.0 < ds.test_fraction < 1.0:
            raise ConfigError("test_fraction must lie strictly between 0 and 1")
        if cfg.n_models != 1:
            raise ConfigError("csv datasets vary by shuffle only; set n_models = 1")
    else:
        if cfg.oracle is not None:
            raise ConfigError("synthetic datasets already carry their generating model; drop [oracle]")
        if cfg.expert_kind != "oracle":
            raise ConfigError("rule experts only apply to csv datasets")
    task = _dataset_task(cfg)
    _check_model_task(cfg.model, task, "model")
    if cfg.oracle is not None:
        _check_model_task(cfg.oracle, task, "oracle")
    needs_oracle = [s for s in cfg.strategies if s in _ORACLE_BACKED]
    if cfg.expert_kind == "oracle":
        rule_only = [s.value for s in cfg.strategies if s in _RULE_ONLY]
        if rule_only:
            raise ConfigError(f"strategies {', '.join(rule_only)} need expert kind passenger_rules")
        if ds.kind == "csv" and cfg.oracle is None:
            raise ConfigError("a csv dataset with an oracle expert needs an [oracle] section")
    else:
        if task is not Task.CLASSIFICATION:
            raise ConfigError("the rule expert explains class labels only")
        bad = [s.value for s in cfg.strategies if s in (StrategyKind.CAIPI, StrategyKind.CAIPI_SINGLE)]
        if bad:
            raise ConfigError(f"strategies {', '.join(bad)} need an oracle expert")
        if needs_oracle and cfg.oracle is None:
            raise ConfigError("oracle-backed strategies alongside the rule expert need an [oracle] section")
    if cfg.background is not None and ds.kind != "csv" and len(cfg.background) != ds.m:
        raise ConfigError(f"background has {len(cfg.background)} values but the dataset has {ds.m} features")


def _dataset_task(cfg: ExperimentConfig) -> Task:
    ds = cfg.dataset
    if ds.kind == "linear":
        return Task.REGRESSION
    if ds.kind == "logistic":
        return Task.CLASSIFICATION
    try:
        schema = load_schema(ds.schema)
    except Exception as exc:
        raise ConfigError(f"unknown dataset schema {ds.schema!r}") from exc
    return Task.REGRESSION if schema["task"] == "regression" else Task.CLASSIFICATION


def _check_model_task(spec: ModelSpec, task: Task, section: str) -> None:
    if spec.kind is ModelKind.LINEAR_REGRESSION and task is not Task.REGRESSION:
        raise ConfigError(f"[{section}] linear_regression fits regression targets only")
    if spec.kind in (ModelKind.LOGISTIC_REGRESSION, ModelKind.KERNEL_SVM) and task is not Task.CLASSIFICATION:
        raise ConfigError(f"[{section}] {spec.kind.value} fits class labels only")


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    return parse_config(path.read_text())


def check_files(cfg: ExperimentConfig) -> None:
    """Fail early when the dataset file a config points at is absent."""
    if cfg.dataset.kind == "csv" and not Path(cfg.dataset.path).is_file():
        raise ConfigError(
            f"dataset file not found: {cfg.dataset.path} (fetch it first, e.g. `attrloop fetch-data {cfg.dataset.schema} {cfg.dataset.path}`)"
        )


def render_config(cfg: ExperimentConfig) -> str:
    """Canonical INI text; parsing it reproduces the config exactly."""
    parser = configparser.ConfigParser(interpolation=None)
    parser["experiment"] = {
        "name": cfg.name,
        "seed": str(cfg.seed),
        "strategies": ", ".join(s.value for s in cfg.strategies),
        "iterations": str(cfg.iterations),
        "query_size": str(cfg.query_size),
        "n_models": str(cfg.n_models),
        "n_shuffles": str(cfg.n_shuffles),
        "output_dir": cfg.output_dir,
    }
    ds = cfg.dataset
    if ds.kind == "csv":
        parser["dataset"] = {
            "kind": ds.kind,
            "path": ds.path,
            "schema": ds.schema,
            "test_fraction": repr(ds.test_fraction),
        }
    else:
        parser["dataset"] = {
            "kind": ds.kind,
            "m": str(ds.m),
            "n_train": str(ds.n_train),
            "n_test": str(ds.n_test),
        }
    parser["model"] = _model_section(cfg.model)
    if cfg.oracle is not None:
        parser["oracle"] = _model_section(cfg.oracle)
    expert: dict[str, str] = {"kind": cfg.expert_kind}
    if cfg.n_perms is not None:
        expert["n_perms"] = str(cfg.n_perms)
    parser["expert"] = expert
    if cfg.k is not None:
        parser["augmentation"] = {"k": str(cfg.k)}
    if cfg.background is not None:
        parser["background"] = {"values": ", ".join(repr(v) for v in cfg.background)}
    out = io.StringIO()
    parser.write(out)
    return out.getvalue()


def _model_section(spec: ModelSpec) -> dict[str, str]:
    section = {"kind": spec.kind.value, "seed": str(spec.seed)}
    for key in sorted(spec.hyperparameters):
        value = spec.hyperparameters[key]
        section[key] = str(int(value)) if value == int(value) else repr(value)
    return section


def _derived_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


_DATASET_NS, _RUN_NS, _SPLIT_NS = 7, 11, 13


class _Materialized:
    """Datasets, oracle and background shared by every job of one config."""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self._synthetic: dict[int, tuple[Dataset, Dataset, object]] = {}
        self._full: Optional[Dataset] = None
        self._csv_oracle = None

    def pool_and_test(self, model_index: int, shuffle_index: int) -> tuple[Dataset, Dataset]:
        ds = self.cfg.dataset
        if ds.kind == "csv":
            split_seed = _derived_seed(self.cfg.seed, _SPLIT_NS, shuffle_index)
            return split_shuffle(self._full_data(), split_seed, ds.test_fraction)
        return self._synthetic_parts(model_index)[:2]

    def oracle_model(self, model_index: int):
        if self.cfg.dataset.kind == "csv":
            if self._csv_oracle is None:
                self._csv_oracle = models.fit(self.cfg.oracle, self._full_data())
            return self._csv_oracle
        return GroundTruthPredictor(self._synthetic_parts(model_index)[2])

    def background(self, pool: Dataset) -> Background:
        if self.cfg.background is not None:
            values = np.array(self.cfg.background, dtype=float)
            if values.shape[0] != pool.m:
                raise ConfigError(f"background has {values.shape[0]} values but the data has {pool.m} features")
            return Background(values)
        if self.cfg.dataset.kind == "csv":
            return compute_background(self._full_data())
        return compute_background(pool)

    def _full_data(self) -> Dataset:
        if self._full is None:
            ds = self.cfg.dataset
            self._full = load_csv_with_schema(ds.path, load_schema(ds.schema))
        return self._full

    def _synthetic_parts(self, model_index: int):
        if model_index not in self._synthetic:
            ds = self.cfg.dataset
            data_seed = _derived_seed(self.cfg.seed, _DATASET_NS, model_index)
            generate = generate_linear if ds.kind == "linear" else generate_logistic
            self._synthetic[model_index] = generate(data_seed, ds.n_train, ds.n_test, ds.m)
        return self._synthetic[model_index]


def _relabel(data: Dataset, oracle) -> Dataset:
    return data.with_targets(oracle.predict_batch(data.features))


def _make_job(
    cfg: ExperimentConfig,
    materialized: _Materialized,
    strategy: StrategyKind,
    model_index: int,
    shuffle_index: int,
    seed_override: Optional[int] = None,
) -> RunJob:
    pool, test = materialized.pool_and_test(model_index, shuffle_index)
    if cfg.expert_kind == "oracle" or strategy in _ORACLE_BACKED:
        oracle = materialized.oracle_model(model_index)
        expert = Expert(ExpertKind.GROUND_TRUTH_MODEL, oracle=oracle, n_perms=cfg.n_perms)
        # The oracle stands in for ground truth: it labels the pool and the
        # held-out data so its own attributions are exactly right.
        pool, test = _relabel(pool, oracle), _relabel(test, oracle)
    else:
        expert = Expert(ExpertKind.PASSENGER_RULES)
    run_seed = seed_override if seed_override is not None else _derived_seed(cfg.seed, _RUN_NS, model_index, shuffle_index)
    loop = LoopConfig(
        strategy=strategy,
        model=cfg.model,
        expert=expert,
        query_size=cfg.query_size,
        iterations=cfg.iterations,
        k=cfg.k,
        background=materialized.background(pool),
        seed=run_seed,
    )
    return RunJob(config=loop, pool=pool, test=test, tag=f"m{model_index}s{shuffle_index}")


def build_jobs(cfg: ExperimentConfig) -> list[RunJob]:
    """The full matrix: every strategy over every model and shuffle index.

    Jobs that differ only in strategy share their run seed, so their query
    sequences match sample for sample and their metric series pair up.
    """
    check_files(cfg)
    materialized = _Materialized(cfg)
    jobs = []
    seen = set()
    for model_index in range(cfg.n_models):
        for shuffle_index in range(cfg.n_shuffles):
            run_seed = _derived_seed(cfg.seed, _RUN_NS, model_index, shuffle_index)
            if run_seed in seen:
                raise EngineError("derived run seeds collide; pick another experiment seed")
            seen.add(run_seed)
            for strategy in cfg.strategies:
                jobs.append(_make_job(cfg, materialized, strategy, model_index, shuffle_index))
    return jobs


def single_job(
    cfg: ExperimentConfig,
    strategy: StrategyKind,
    model_index: int = 0,
    shuffle_index: int = 0,
    seed_override: Optional[int] = None,
) -> RunJob:
    """One cell of the matrix, prepared exactly as ``build_jobs`` prepares it."""
    if strategy not in cfg.strategies:
        raise ConfigError(f"strategy {strategy.value} is not listed in the config")
    if not 0 <= model_index < cfg.n_models or not 0 <= shuffle_index < cfg.n_shuffles:
        raise ConfigError("model or shuffle index out of range")
    check_files(cfg)
    return _make_job(cfg, _Materialized(cfg), strategy, model_index, shuffle_index, seed_override)
