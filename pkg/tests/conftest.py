"""Shared fixtures: deterministic stand-in CSV datasets and config scaffolding.

The housing and passenger experiments read CSV files that are not shipped with
the repository. When the real files are present under data/ the fixtures use
them; otherwise they synthesize stand-ins with the same shape, column names
and signal structure, so every test runs offline.
"""
from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

REPO_ROOT = Path(__file__).resolve().parent.parent
DATA_DIR = REPO_ROOT / "data"

BOSTON_COLUMNS = ["crim", "zn", "indus", "chas", "nox", "rm", "age", "dis", "rad", "tax", "ptratio", "b", "lstat"]


def _write_housing_csv(path: Path) -> None:
    # 506 rows, 13 numeric columns, median-value target driven mostly by
    # room count, lower-status share and pollution, which a shallow tree
    # ensemble can pick up.
    rng = np.random.default_rng(60506)
    n = 506
    crim = np.round(rng.lognormal(-1.0, 1.5, n), 5)
    zn = rng.choice([0.0, 12.5, 25.0, 80.0], n, p=[0.7, 0.15, 0.1, 0.05])
    indus = np.round(rng.uniform(0.5, 27.0, n), 2)
    chas = (rng.random(n) < 0.07).astype(float)
    nox = np.round(rng.uniform(0.38, 0.87, n), 3)
    rm = np.round(rng.normal(6.3, 0.7, n), 3)
    age = np.round(rng.uniform(2.0, 100.0, n), 1)
    dis = np.round(rng.uniform(1.1, 12.0, n), 4)
    rad = rng.choice([1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 24.0], n)
    tax = np.round(rng.uniform(187, 711, n))
    ptratio = np.round(rng.uniform(12.6, 22.0, n), 1)
    b = np.round(rng.uniform(0.3, 396.9, n), 2)
    lstat = np.round(rng.uniform(1.7, 38.0, n), 2)
    medv = (
        22.0
        + 6.5 * (rm - 6.3)
        - 0.45 * (lstat - 12.0)
        - 16.0 * (nox - 0.55)
        + 0.4 * (dis - 3.8)
        + 2.5 * chas
        + rng.normal(0.0, 1.0, n)
    )
    medv = np.round(np.clip(medv, 5.0, 50.0), 2)
    header = ",".join(BOSTON_COLUMNS + ["medv"])
    cols = [crim, zn, indus, chas, nox, rm, age, dis, rad, tax, ptratio, b, lstat, medv]
    lines = [header]
    for i in range(n):
        lines.append(",".join(repr(float(c[i])) for c in cols))
    path.write_text("\n".join(lines) + "\n")


def _write_passenger_csv(path: Path) -> None:
    # Survival follows a women-and-children-first pattern with moderate class,
    # age and family-size effects. Moderate cell probabilities keep the label
    # signal noisy, which is where single-feature counterfactual feedback has
    # an edge over labels alone.
    rng = np.random.default_rng(1912)
    n = 760
    pclass = rng.choice([1, 2, 3], n, p=[0.24, 0.21, 0.55])
    female = rng.random(n) < 0.35
    child = rng.random(n) < 0.12
    age = np.where(child, np.round(rng.uniform(0.42, 11.0, n), 1), np.round(rng.uniform(13.0, 71.0, n)))
    sibsp = rng.choice([0, 1, 2, 3, 4], n, p=[0.68, 0.21, 0.06, 0.03, 0.02])
    p_women = np.select([pclass == 1, pclass == 2], [0.80, 0.75], 0.66)
    p_boys = np.select([pclass == 1, pclass == 2], [0.42, 0.38], 0.25)
    p_men = np.select([pclass == 1, pclass == 2], [0.42, 0.30], 0.18)
    p_men = p_men - 0.002 * np.clip(age - 13.0, 0.0, None)
    p_survive = np.where(female, p_women, np.where(age < 12.0, p_boys, p_men))
    p_survive = np.clip(p_survive - 0.025 * sibsp, 0.02, 0.97)
    survived = (rng.random(n) < p_survive).astype(int)
    # A slice of missing ages exercises the loader's row dropping.
    missing = rng.random(n) < 0.05
    lines = ["Survived,Pclass,Sex,Age,SibSp,Fare"]
    for i in range(n):
        sex = "female" if female[i] else "male"
        age_cell = "" if missing[i] else repr(float(age[i]))
        fare = repr(round(float(rng.uniform(5.0, 120.0) / pclass[i]), 4))
        lines.append(f"{survived[i]},{pclass[i]},{sex},{age_cell},{sibsp[i]},{fare}")
    path.write_text("\n".join(lines) + "\n")


@pytest.fixture(scope="session")
def boston_csv(tmp_path_factory) -> Path:
    real = DATA_DIR / "boston.csv"
    if real.is_file():
        return real
    path = tmp_path_factory.mktemp("data") / "boston.csv"
    _write_housing_csv(path)
    return path


@pytest.fixture(scope="session")
def titanic_csv(tmp_path_factory) -> Path:
    real = DATA_DIR / "titanic.csv"
    if real.is_file():
        return real
    path = tmp_path_factory.mktemp("data") / "titanic.csv"
    _write_passenger_csv(path)
    return path


@pytest.fixture()
def write_config(tmp_path):
    def _write(text: str, name: str = "experiment.cfg") -> Path:
        path = tmp_path / name
        path.write_text(text)
        return path

    return _write


LINEAR_CFG = """\
[experiment]
name = {name}
seed = {seed}
strategies = {strategies}
iterations = {iterations}
query_size = 1
n_models = {n_models}
n_shuffles = {n_shuffles}
output_dir = {output_dir}

[dataset]
kind = linear
m = {m}
n_train = {n_train}
n_test = {n_test}

[model]
kind = linear_regression
"""


def linear_cfg_text(
    name: str = "t",
    seed: int = 5,
    strategies: str = "baseline, interactive_occlusion",
    iterations: int = 3,
    n_models: int = 1,
    n_shuffles: int = 1,
    m: int = 4,
    n_train: int = 40,
    n_test: int = 40,
    output_dir: str = "results/t",
) -> str:
    return LINEAR_CFG.format(
        name=name,
        seed=seed,
        strategies=strategies,
        iterations=iterations,
        n_models=n_models,
        n_shuffles=n_shuffles,
        m=m,
        n_train=n_train,
        n_test=n_test,
        output_dir=output_dir,
    )
