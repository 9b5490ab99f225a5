"""Model zoo behind one train/predict contract, trained from scratch with numpy.

Every trainer is a pure function of (spec, data): refitting with the same
inputs reproduces predictions bit for bit, which the experiment loop relies
on for paired comparisons.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .data import Dataset, LinearGroundTruth, Link, Task


class ModelError(Exception):
    pass


class SingleClassError(ModelError):
    pass


class ModelKind(enum.Enum):
    LINEAR_REGRESSION = "linear_regression"
    LOGISTIC_REGRESSION = "logistic_regression"
    BOOSTED_TREES = "boosted_trees"
    MLP = "mlp"
    KERNEL_SVM = "kernel_svm"


_DEFAULTS: dict[ModelKind, dict[str, float]] = {
    ModelKind.LINEAR_REGRESSION: {},
    ModelKind.LOGISTIC_REGRESSION: {"epochs": 1000, "learning_rate": 0.1, "l2": 1e-4},
    ModelKind.BOOSTED_TREES: {"n_trees": 10, "max_depth": 3, "learning_rate": 0.1},
    ModelKind.MLP: {"hidden": 9, "epochs": 100, "learning_rate": 0.01},
    ModelKind.KERNEL_SVM: {"epochs": 200},
}

_RIDGE_FALLBACK = 1e-10


@dataclass(frozen=True)
class ModelSpec:
    """Model family plus validated hyperparameters and a training seed."""

    kind: ModelKind
    hyperparameters: Mapping[str, float] = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self) -> None:
        merged = dict(_DEFAULTS[self.kind])
        unknown = set(self.hyperparameters) - set(merged)
        if unknown:
            raise ModelError(f"unknown hyperparameters for {self.kind.value}: {sorted(unknown)}")
        merged.update({k: float(v) for k, v in self.hyperparameters.items()})
        for key in ("n_trees", "epochs", "hidden", "max_depth"):
            if key in merged and (merged[key] < 1 or merged[key] != int(merged[key])):
                raise ModelError(f"{key} must be a positive integer, got {merged[key]}")
        if merged.get("learning_rate", 1.0) <= 0:
            raise ModelError("learning_rate must be positive")
        if merged.get("l2", 0.0) < 0:
            raise ModelError("l2 must be nonnegative")
        object.__setattr__(self, "hyperparameters", merged)

    def hp(self, key: str) -> float:
        return self.hyperparameters[key]


class Model:
    """Opaque trained predictor; regression returns reals, classification hard 0/1 labels."""

    def __init__(self, spec: ModelSpec, task: Task, m: int, state) -> None:
        self.spec = spec
        self.task = task
        self.m = m
        self._state = state

    def predict_one(self, x: np.ndarray) -> float:
        return float(self.predict_batch(np.asarray(x, dtype=float).reshape(1, -1))[0])

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ModelError(f"expected a 2-d batch, got shape {X.shape}")
        if X.shape[0] == 0:
            return np.empty(0)
        if X.shape[1] != self.m:
            raise ModelError(f"expected {self.m} features, got {X.shape[1]}")
        scores = self._state.score(X)
        if self.task is Task.CLASSIFICATION:
            return np.where(scores >= self._state.threshold, 1.0, 0.0)
        return scores


class GroundTruthPredictor:
    """The data-generating function wrapped behind the predictor contract."""

    def __init__(self, gt: LinearGroundTruth) -> None:
        self.gt = gt
        self.task = Task.CLASSIFICATION if gt.link is Link.HEAVISIDE else Task.REGRESSION
        self.m = gt.m

    def predict_one(self, x: np.ndarray) -> float:
        return self.gt(np.asarray(x, dtype=float))

    def predict_batch(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise ModelError(f"expected a 2-d batch, got shape {X.shape}")
        if X.shape[0] == 0:
            return np.empty(0)
        if X.shape[1] != self.m:
            raise ModelError(f"expected {self.m} features, got {X.shape[1]}")
        return self.gt.batch(X)


def predict(model, x: np.ndarray) -> float:
    """Point prediction; classification ties at the decision boundary go to class 1."""
    return model.predict_one(x)


def predict_batch(model, X: np.ndarray) -> np.ndarray:
    return model.predict_batch(X)


def untrained(spec: ModelSpec, task: Task, m: int) -> Model:
    """A model with no training signal yet: all-zero coefficients, so it predicts 0."""
    return Model(spec, task, m, _Zero())


def fit(spec: ModelSpec, train: Dataset) -> Model:
    """Train a model of the requested kind; pure function of (spec, train)."""
    if train.n < 1:
        raise ModelError("training data must be nonempty")
    X, y = train.features, train.targets
    if train.task is Task.CLASSIFICATION and spec.kind is not ModelKind.LINEAR_REGRESSION:
        if y.min() == y.max():
            raise SingleClassError("classification training data holds a single class")
    if spec.kind is ModelKind.LINEAR_REGRESSION:
        state = _fit_linear(X, y)
    elif spec.kind is ModelKind.LOGISTIC_REGRESSION:
        state = _fit_logistic(X, y, spec)
    elif spec.kind is ModelKind.BOOSTED_TREES:
        state = _fit_boosted(X, y, spec, train.task)
    elif spec.kind is ModelKind.MLP:
        state = _fit_mlp(X, y, spec, train.task)
    elif spec.kind is ModelKind.KERNEL_SVM:
        if train.task is not Task.CLASSIFICATION:
            raise ModelError("kernel SVM supports classification only")
        state = _fit_svm(X, y, spec)
    else:  # pragma: no cover
        raise ModelError(f"unhandled kind {spec.kind}")
    return Model(spec, train.task, X.shape[1], state)


# --- linear and logistic ---


class _Zero:
    threshold = 0.0

    def score(self, X: np.ndarray) -> np.ndarray:
        return np.zeros(X.shape[0])


class _Affine:
    threshold = 0.5  # scores are regression outputs; used only if task is classification

    def __init__(self, weights: np.ndarray, intercept: float) -> None:
        self.weights = weights
        self.intercept = intercept

    def score(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.intercept


def _with_intercept(X: np.ndarray) -> np.ndarray:
    return np.hstack([X, np.ones((X.shape[0], 1))])


def _fit_linear(X: np.ndarray, y: np.ndarray) -> _Affine:
    # Normal equations; a tiny ridge is added only when the Gram matrix is singular.
    X1 = _with_intercept(X)
    gram = X1.T @ X1
    rhs = X1.T @ y
    try:
        np.linalg.cholesky(gram)
    except np.linalg.LinAlgError:
        gram = gram + _RIDGE_FALLBACK * np.eye(gram.shape[0])
    try:
        beta = np.linalg.solve(gram, rhs)
    except np.linalg.LinAlgError:
        beta = np.linalg.lstsq(X1, y, rcond=None)[0]
    return _Affine(beta[:-1], float(beta[-1]))


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class _Logistic:
    threshold = 0.0  # score is the logit

    def __init__(self, weights: np.ndarray, intercept: float) -> None:
        self.weights = weights
        self.intercept = intercept

    def score(self, X: np.ndarray) -> np.ndarray:
        return X @ self.weights + self.intercept


def _fit_logistic(X: np.ndarray, y: np.ndarray, spec: ModelSpec) -> _Logistic:
    n, m = X.shape
    epochs = int(spec.hp("epochs"))
    lr = spec.hp("learning_rate")
    l2 = spec.hp("l2")
    w = np.zeros(m)
    b = 0.0
    for _ in range(epochs):
        p = _sigmoid(X @ w + b)
        err = p - y
        w -= lr * (X.T @ err / n + l2 * w)
        b -= lr * float(err.mean())
    return _Logistic(w, b)


# --- boosted trees ---


class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "value")

    def __init__(self, value: float = 0.0) -> None:
        self.feature = -1
        self.threshold = 0.0
        self.left = None
        self.right = None
        self.value = value

    @property
    def is_leaf(self) -> bool:
        return self.left is None


def _best_split(X: np.ndarray, g: np.ndarray) -> tuple[int, float, float] | None:
    """Exact greedy least-squares split: (feature, threshold, sse) or None.

    Ties keep the earliest feature and the lowest threshold so tree shapes
    are reproducible.
    """
    n = len(g)
    if n < 2:
        return None
    total1 = g.sum()
    total2 = float(g @ g)
    best_sse = total2 - total1 * total1 / n
    if best_sse <= 1e-12:
        return None
    best = None
    for j in range(X.shape[1]):
        col = X[:, j]
        order = np.argsort(col, kind="stable")
        sorted_col = col[order]
        gs = g[order]
        cut = np.nonzero(sorted_col[1:] > sorted_col[:-1])[0]
        if cut.size == 0:
            continue
        s1 = np.cumsum(gs)[cut]
        s2 = np.cumsum(gs * gs)[cut]
        k = (cut + 1).astype(float)
        sse = (s2 - s1 * s1 / k) + ((total2 - s2) - (total1 - s1) ** 2 / (n - k))
        i = int(np.argmin(sse))
        if sse[i] < best_sse - 1e-12:
            best_sse = float(sse[i])
            thr = 0.5 * (sorted_col[cut[i]] + sorted_col[cut[i] + 1])
            best = (j, float(thr), best_sse)
    return best


def _grow_tree(X: np.ndarray, g: np.ndarray, depth: int) -> _TreeNode:
    node = _TreeNode(value=float(g.mean()))
    if depth == 0:
        return node
    split = _best_split(X, g)
    if split is None:
        return node
    j, thr, _ = split
    mask = X[:, j] <= thr
    node.feature = j
    node.threshold = thr
    node.left = _grow_tree(X[mask], g[mask], depth - 1)
    node.right = _grow_tree(X[~mask], g[~mask], depth - 1)
    return node


def _tree_apply(node: _TreeNode, X: np.ndarray, out: np.ndarray, idx: np.ndarray) -> None:
    if node.is_leaf:
        out[idx] = node.value
        return
    mask = X[idx, node.feature] <= node.threshold
    _tree_apply(node.left, X, out, idx[mask])
    _tree_apply(node.right, X, out, idx[~mask])


def _tree_predict(node: _TreeNode, X: np.ndarray) -> np.ndarray:
    out = np.empty(X.shape[0])
    _tree_apply(node, X, out, np.arange(X.shape[0]))
    return out


def _tree_leaves(node: _TreeNode, X: np.ndarray, idx: np.ndarray, acc: list) -> None:
    if node.is_leaf:
        acc.append((node, idx))
        return
    mask = X[idx, node.feature] <= node.threshold
    _tree_leaves(node.left, X, idx[mask], acc)
    _tree_leaves(node.right, X, idx[~mask], acc)


class _Boosted:
    def __init__(self, trees: list[_TreeNode], f0: float, lr: float, classification: bool) -> None:
        self.trees = trees
        self.f0 = f0
        self.lr = lr
        self.classification = classification
        self.threshold = 0.0  # score is the additive ensemble output (log-odds when classifying)

    def score(self, X: np.ndarray) -> np.ndarray:
        out = np.full(X.shape[0], self.f0)
        for tree in self.trees:
            out += self.lr * _tree_predict(tree, X)
        return out


def _fit_boosted(X: np.ndarray, y: np.ndarray, spec: ModelSpec, task: Task) -> _Boosted:
    n_trees = int(spec.hp("n_trees"))
    depth = int(spec.hp("max_depth"))
    lr = spec.hp("learning_rate")
    classification = task is Task.CLASSIFICATION
    if classification:
        p0 = float(np.clip(y.mean(), 1e-6, 1.0 - 1e-6))
        f0 = float(np.log(p0 / (1.0 - p0)))
    else:
        f0 = float(y.mean())
    scores = np.full(X.shape[0], f0)
    trees: list[_TreeNode] = []
    for _ in range(n_trees):
        if classification:
            p = _sigmoid(scores)
            residual = y - p
            tree = _grow_tree(X, residual, depth)
            leaves: list[tuple[_TreeNode, np.ndarray]] = []
            _tree_leaves(tree, X, np.arange(X.shape[0]), leaves)
            for leaf, idx in leaves:
                hess = float(np.sum(p[idx] * (1.0 - p[idx])))
                leaf.value = float(residual[idx].sum() / max(hess, 1e-12))
        else:
            tree = _grow_tree(X, y - scores, depth)
        scores += lr * _tree_predict(tree, X)
        trees.append(tree)
    return _Boosted(trees, f0, lr, classification)


# --- multilayer perceptron ---


class _Mlp:
    threshold = 0.0  # classification scores are logits

    def __init__(self, w1, b1, w2, b2, classification: bool) -> None:
        self.w1, self.b1, self.w2, self.b2 = w1, b1, w2, b2
        self.classification = classification

    def score(self, X: np.ndarray) -> np.ndarray:
        hidden = np.maximum(X @ self.w1 + self.b1, 0.0)
        return hidden @ self.w2 + self.b2


def _fit_mlp(X: np.ndarray, y: np.ndarray, spec: ModelSpec, task: Task) -> _Mlp:
    rng = np.random.default_rng(spec.seed)
    n, m = X.shape
    hidden = int(spec.hp("hidden"))
    lr = spec.hp("learning_rate")
    epochs = int(spec.hp("epochs"))
    classification = task is Task.CLASSIFICATION
    w1 = rng.uniform(-0.5, 0.5, size=(m, hidden))
    b1 = rng.uniform(-0.5, 0.5, size=hidden)
    w2 = rng.uniform(-0.5, 0.5, size=hidden)
    b2 = float(rng.uniform(-0.5, 0.5))
    for _ in range(epochs):
        for i in rng.permutation(n):
            x = X[i]
            pre = x @ w1 + b1
            act = np.maximum(pre, 0.0)
            out = float(act @ w2 + b2)
            if classification:
                delta = _sigmoid(np.array([out]))[0] - y[i]
            else:
                delta = out - y[i]
            grad_w2 = delta * act
            grad_hidden = delta * w2 * (pre > 0.0)
            w2 -= lr * grad_w2
            b2 -= lr * delta
            w1 -= lr * np.outer(x, grad_hidden)
            b1 -= lr * grad_hidden
    return _Mlp(w1, b1, w2, b2, classification)


# --- kernel SVM ---


class _KernelSvm:
    threshold = 0.0

    def __init__(self, support: np.ndarray, alpha: np.ndarray, gamma: float) -> None:
        self.support = support
        self.alpha = alpha
        self.gamma = gamma

    def score(self, X: np.ndarray) -> np.ndarray:
        return _rbf(X, self.support, self.gamma) @ self.alpha


def _rbf(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    sq = np.sum(A * A, axis=1)[:, None] + np.sum(B * B, axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def _fit_svm(X: np.ndarray, y: np.ndarray, spec: ModelSpec) -> _KernelSvm:
    n, m = X.shape
    epochs = int(spec.hp("epochs"))
    mean_var = float(np.var(X, axis=0).mean())
    gamma = 1.0 / (m * mean_var) if mean_var > 1e-12 else 1.0
    lam = 1.0 / n
    signs = np.where(y > 0.5, 1.0, -1.0)
    kernel = _rbf(X, X, gamma)
    alpha = np.zeros(n)
    # Full-batch hinge subgradient steps with the classic 1/(lambda t) rate.
    for t in range(1, epochs + 1):
        eta = 1.0 / (lam * t)
        margins = signs * (kernel @ alpha)
        alpha *= 1.0 - eta * lam
        violating = margins < 1.0
        alpha[violating] += eta * signs[violating] / n
    return _KernelSvm(X.copy(), alpha, gamma)
