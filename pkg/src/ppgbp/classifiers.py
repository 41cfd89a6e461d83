"""Classical classifier heads: a Gini random forest and a kernel SVM solved
by sequential minimal optimization with a normalized primal-dual gap as the
stopping rule.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class ClassifierError(Exception):
    pass


class EmptyTrainingSet(ClassifierError):
    pass


class ShapeMismatch(ClassifierError):
    pass


class DegenerateLabels(ClassifierError):
    pass


class NoConvergence(ClassifierError):
    def __init__(self, max_sweeps):
        super().__init__(f"SMO did not converge within {max_sweeps} sweeps")
        self.max_sweeps = max_sweeps


# ---------------------------------------------------------------------------
# Random forest
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ForestConfig:
    n_estimators: int = 300
    max_depth: int = 100
    min_samples_split: int = 3
    seed: int = 0
    # features examined per split; None means floor(sqrt(n_features))
    features_per_split: int | None = None


def _gini(counts):
    total = counts.sum()
    p = counts / total
    return 1.0 - np.sum(p * p)


def _best_split(X, y, feature_ids, n_classes):
    """Best (feature, threshold) by weighted Gini among the given features.

    Thresholds are midpoints between consecutive distinct sorted values, so
    splits depend only on feature order (scale invariant).
    """
    n = len(y)
    best = (np.inf, None, None)
    for f in feature_ids:
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        ys = y[order]
        onehot = np.zeros((n, n_classes))
        onehot[np.arange(n), ys] = 1.0
        left_counts = np.cumsum(onehot, axis=0)  # counts for splits after row i
        total = left_counts[-1]
        boundaries = np.nonzero(xs[1:] != xs[:-1])[0]
        if len(boundaries) == 0:
            continue
        for i in boundaries:
            lc = left_counts[i]
            rc = total - lc
            nl = i + 1
            score = (nl * _gini(lc) + (n - nl) * _gini(rc)) / n
            if score < best[0]:
                best = (score, f, 0.5 * (xs[i] + xs[i + 1]))
    return best[1], best[2]


class _TreeNode:
    __slots__ = ("feature", "threshold", "left", "right", "counts")

    def __init__(self, feature=None, threshold=None, left=None, right=None, counts=None):
        self.feature = feature
        self.threshold = threshold
        self.left = left
        self.right = right
        self.counts = counts

    @property
    def is_leaf(self):
        return self.feature is None

    def to_dict(self):
        if self.is_leaf:
            return {"counts": self.counts.tolist()}
        return {
            "feature": int(self.feature),
            "threshold": float(self.threshold),
            "left": self.left.to_dict(),
            "right": self.right.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        if "counts" in d:
            return cls(counts=np.array(d["counts"], dtype=np.float64))
        return cls(feature=d["feature"], threshold=d["threshold"],
                   left=cls.from_dict(d["left"]), right=cls.from_dict(d["right"]))


def _grow_tree(X, y, depth, config, rng, n_classes, k):
    counts = np.bincount(y, minlength=n_classes).astype(np.float64)
    if (depth >= config.max_depth or len(y) < config.min_samples_split
            or np.count_nonzero(counts) <= 1):
        return _TreeNode(counts=counts)
    feature_ids = rng.choice(X.shape[1], size=k, replace=False)
    feature, threshold = _best_split(X, y, feature_ids, n_classes)
    if feature is None:
        return _TreeNode(counts=counts)
    mask = X[:, feature] <= threshold
    left = _grow_tree(X[mask], y[mask], depth + 1, config, rng, n_classes, k)
    right = _grow_tree(X[~mask], y[~mask], depth + 1, config, rng, n_classes, k)
    return _TreeNode(feature=feature, threshold=threshold, left=left, right=right)


def _tree_predict_one(node, x):
    while not node.is_leaf:
        node = node.left if x[node.feature] <= node.threshold else node.right
    return int(np.argmax(node.counts))


@dataclass
class Forest:
    trees: list
    n_features: int
    n_classes: int
    config: ForestConfig

    def save(self, path):
        payload = {
            "format_version": 1,
            "n_features": self.n_features,
            "n_classes": self.n_classes,
            "config": {
                "n_estimators": self.config.n_estimators,
                "max_depth": self.config.max_depth,
                "min_samples_split": self.config.min_samples_split,
                "seed": self.config.seed,
                "features_per_split": self.config.features_per_split,
            },
            "trees": [t.to_dict() for t in self.trees],
        }
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def load(cls, path):
        payload = json.loads(Path(path).read_text())
        return cls(
            trees=[_TreeNode.from_dict(t) for t in payload["trees"]],
            n_features=payload["n_features"],
            n_classes=payload["n_classes"],
            config=ForestConfig(**payload["config"]),
        )


def rf_fit(X, y, config: ForestConfig = ForestConfig()) -> Forest:
    """Bootstrap-aggregated Gini trees with a random feature subset per node."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=int)
    if len(y) < 2:
        raise EmptyTrainingSet(f"need >= 2 samples, got {len(y)}")
    n_classes = int(y.max()) + 1 if len(y) else 0
    n, m = X.shape
    k = config.features_per_split or max(1, int(np.floor(np.sqrt(m))))
    k = min(k, m)
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_estimators)
    trees = []
    for seq in seeds:
        rng = np.random.default_rng(seq)
        boot = rng.integers(0, n, size=n)
        trees.append(_grow_tree(X[boot], y[boot], 0, config, rng, n_classes, k))
    return Forest(trees=trees, n_features=m, n_classes=n_classes, config=config)


def rf_predict(forest: Forest, x):
    """Majority vote over trees; ties resolve to the lowest class index."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != forest.n_features:
        raise ShapeMismatch(f"expected {forest.n_features} features, got {x.shape[-1]}")
    votes = np.bincount(
        [_tree_predict_one(t, x) for t in forest.trees], minlength=forest.n_classes
    )
    cls = int(np.argmax(votes))  # argmax takes the first maximum: lowest index wins ties
    return cls, votes[cls] / len(forest.trees)


def rf_predict_proba(forest: Forest, X):
    X = np.asarray(X, dtype=np.float64)
    out = np.zeros((len(X), forest.n_classes))
    for i, x in enumerate(X):
        votes = np.bincount(
            [_tree_predict_one(t, x) for t in forest.trees], minlength=forest.n_classes
        )
        out[i] = votes / len(forest.trees)
    return out


# ---------------------------------------------------------------------------
# SVM via SMO
# ---------------------------------------------------------------------------

def _kernel_matrix(kind, gamma, A, B):
    if kind == "linear":
        return A @ B.T
    if kind == "rbf":
        sq = (A * A).sum(axis=1)[:, None] + (B * B).sum(axis=1)[None, :] - 2.0 * A @ B.T
        return np.exp(-gamma * np.maximum(sq, 0.0))
    raise ValueError(f"unknown kernel {kind!r}")


@dataclass
class SvmModel:
    X: np.ndarray
    y: np.ndarray          # labels in {-1, +1}
    alpha: np.ndarray
    b: float
    kernel: str
    gamma: float | None
    C: float
    gap: float
    sweeps: int = 0

    def decision(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape[1] != self.X.shape[1]:
            raise ShapeMismatch(f"expected {self.X.shape[1]} features, got {X.shape[1]}")
        K = _kernel_matrix(self.kernel, self.gamma, X, self.X)
        return K @ (self.alpha * self.y) + self.b

    def predict(self, X):
        return np.where(self.decision(X) >= 0, 1, -1)

    def save(self, path):
        payload = {
            "format_version": 1,
            "kernel": self.kernel,
            "gamma": self.gamma,
            "C": self.C,
            "b": self.b,
            "gap": self.gap,
            "X": self.X.tolist(),
            "y": self.y.tolist(),
            "alpha": self.alpha.tolist(),
        }
        Path(path).write_text(json.dumps(payload))

    @classmethod
    def load(cls, path):
        p = json.loads(Path(path).read_text())
        return cls(X=np.array(p["X"]), y=np.array(p["y"], dtype=np.float64),
                   alpha=np.array(p["alpha"]), b=p["b"], kernel=p["kernel"],
                   gamma=p["gamma"], C=p["C"], gap=p["gap"])


def _optimal_bias(alpha, y, g, C):
    """Bias from free support vectors, falling back to the midpoint of the
    KKT-feasible interval; g is the margin term without bias."""
    free = (alpha > 1e-12) & (alpha < C - 1e-12)
    if np.any(free):
        return float(np.mean(y[free] - g[free]))
    up = (alpha < C - 1e-12) & (y > 0) | (alpha > 1e-12) & (y < 0)
    lo = (alpha < C - 1e-12) & (y < 0) | (alpha > 1e-12) & (y > 0)
    hi_bound = np.min(y[up] - g[up]) if np.any(up) else 0.0
    lo_bound = np.max(y[lo] - g[lo]) if np.any(lo) else 0.0
    return float(0.5 * (hi_bound + lo_bound))


def feasibility_gap(alpha, y, K, C, b):
    """Normalized primal-dual gap: (primal - dual) / (primal + 1)."""
    v = alpha * y
    g = K @ v
    quad = 0.5 * float(v @ g)
    dual = float(alpha.sum()) - quad
    slack = np.maximum(0.0, 1.0 - y * (g + b))
    primal = quad + C * float(slack.sum())
    return (primal - dual) / (primal + 1.0), primal, dual


def svm_fit(X, y, kernel="rbf", C=1.0, tol=1e-6, gamma=None,
            max_sweeps=10_000) -> SvmModel:
    """Dual SMO with maximal-violating-pair selection.

    Terminates once the normalized primal-dual gap drops to `tol` (or the
    KKT violation vanishes).  Labels must be in {-1, +1}.
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if set(np.unique(y)) != {-1.0, 1.0}:
        raise DegenerateLabels("labels must contain both -1 and +1")
    n = len(y)
    if gamma is None and kernel == "rbf":
        var = X.var()
        gamma = 1.0 / (X.shape[1] * var) if var > 0 else 1.0
    K = _kernel_matrix(kernel, gamma, X, X)
    Q = (y[:, None] * y[None, :]) * K

    alpha = np.zeros(n)
    grad = -np.ones(n)  # gradient of 0.5 a^T Q a - sum(a)
    eps_pair = 1e-12

    sweeps = 0
    checks_per_sweep = max(1, n)
    it = 0
    gap = np.inf
    while sweeps < max_sweeps:
        # maximal violating pair (Keerthi working-set selection)
        y_grad = -y * grad
        up = (y > 0) & (alpha < C - eps_pair) | (y < 0) & (alpha > eps_pair)
        lo = (y > 0) & (alpha > eps_pair) | (y < 0) & (alpha < C - eps_pair)
        if not np.any(up) or not np.any(lo):
            break
        i = np.flatnonzero(up)[np.argmax(y_grad[up])]
        j = np.flatnonzero(lo)[np.argmin(y_grad[lo])]
        if y_grad[i] - y_grad[j] < 1e-14:
            gap, _, _ = feasibility_gap(alpha, y, K, C,
                                        _optimal_bias(alpha, y, K @ (alpha * y), C))
            break

        # analytic two-variable update along y_i e_i - y_j e_j
        quad = max(K[i, i] + K[j, j] - 2.0 * K[i, j], 1e-12)
        delta = (y_grad[i] - y_grad[j]) / quad
        # clip so both alphas stay in [0, C]
        if y[i] > 0:
            delta = min(delta, C - alpha[i])
        else:
            delta = min(delta, alpha[i])
        if y[j] > 0:
            delta = min(delta, alpha[j])
        else:
            delta = min(delta, C - alpha[j])
        alpha[i] += y[i] * delta
        alpha[j] -= y[j] * delta
        grad += Q[:, i] * (y[i] * delta) - Q[:, j] * (y[j] * delta)

        it += 1
        if it % checks_per_sweep == 0:
            sweeps += 1
            g = K @ (alpha * y)
            b = _optimal_bias(alpha, y, g, C)
            gap, _, _ = feasibility_gap(alpha, y, K, C, b)
            if gap <= tol:
                break
    else:
        raise NoConvergence(max_sweeps)

    g = K @ (alpha * y)
    b = _optimal_bias(alpha, y, g, C)
    gap, _, _ = feasibility_gap(alpha, y, K, C, b)
    return SvmModel(X=X, y=y, alpha=alpha, b=b, kernel=kernel, gamma=gamma,
                    C=C, gap=gap, sweeps=sweeps)


def svm_predict(model: SvmModel, x):
    """(class in {-1,+1}, decision value); the boundary maps to +1."""
    d = model.decision(np.atleast_2d(x))[0]
    return (1 if d >= 0 else -1), float(d)


def svm_predict_proba(model: SvmModel, X):
    """Two-column logistic squash of the decision value (class order: -1, +1).

    This is a monotone score mapping, not a calibrated probability.
    """
    d = model.decision(X)
    p_pos = 1.0 / (1.0 + np.exp(-d))
    return np.column_stack([1.0 - p_pos, p_pos])
