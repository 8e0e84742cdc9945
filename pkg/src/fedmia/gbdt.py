"""Gradient-boosted regression trees for binary classification under logistic loss.

Each tree is grown greedily on first/second-order statistics (g = p - y,
h = p(1 - p)) with the usual regularised gain

    gain = 1/2 [ G_L^2 / (H_L + lambda) + G_R^2 / (H_R + lambda) - G^2 / (H + lambda) ]

and leaf weights ``-G / (H + lambda)``. Split candidates are midpoints between
consecutive distinct feature values; samples with ``x <= threshold`` go left.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.special import expit
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import ConfigurationError, DegenerateDataError, ShapeError
from .validation import check_feature_matrix

LEAF = -1


@dataclass(frozen=True)
class GbdtConfig:
    n_trees: int = 100
    max_depth: int = 3
    learning_rate: float = 0.1
    min_samples_leaf: int = 5
    subsample: float = 1.0
    reg_lambda: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1 or self.max_depth < 1:
            raise ConfigurationError("n_trees and max_depth must be >= 1")
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if self.min_samples_leaf < 1:
            raise ConfigurationError("min_samples_leaf must be >= 1")
        if not 0.0 < self.subsample <= 1.0:
            raise ConfigurationError("subsample must lie in (0, 1]")
        if self.reg_lambda < 0:
            raise ConfigurationError("reg_lambda must be nonnegative")

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class Tree:
    """Flat array encoding; node 0 is the root."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    gain: np.ndarray = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf node index for each row."""
        node = np.zeros(len(X), dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            n = node[rows]
            go_left = X[rows, self.feature[n]] <= self.threshold[n]
            node[rows] = np.where(go_left, self.left[n], self.right[n])
            active[rows] = self.feature[node[rows]] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]


def split_gain(G_left, H_left, G_right, H_right, reg_lambda):
    G, H = G_left + G_right, H_left + H_right
    return 0.5 * (
        G_left**2 / (H_left + reg_lambda)
        + G_right**2 / (H_right + reg_lambda)
        - G**2 / (H + reg_lambda)
    )


def _best_split(X, g, h, rows, order, cfg):
    """Best (gain, feature, threshold) for the node holding ``rows``; gain <= 0 means none."""
    in_node = np.zeros(X.shape[0], dtype=bool)
    in_node[rows] = True
    n = len(rows)
    best = (0.0, LEAF, 0.0)
    min_leaf = cfg.min_samples_leaf
    if n < 2 * min_leaf:
        return best
    G, H = g[rows].sum(), h[rows].sum()
    for f in range(X.shape[1]):
        idx = order[f][in_node[order[f]]]
        xs = X[idx, f]
        GL = np.cumsum(g[idx])[:-1]
        HL = np.cumsum(h[idx])[:-1]
        n_left = np.arange(1, n)
        valid = (xs[1:] > xs[:-1]) & (n_left >= min_leaf) & (n - n_left >= min_leaf)
        if not valid.any():
            continue
        gains = split_gain(GL, HL, G - GL, H - HL, cfg.reg_lambda)
        gains = np.where(valid, gains, -np.inf)
        pos = int(np.argmax(gains))
        if gains[pos] > best[0]:
            lo, hi = xs[pos], xs[pos + 1]
            thr = 0.5 * (lo + hi)
            if not lo <= thr < hi:
                thr = lo
            best = (float(gains[pos]), f, float(thr))
    return best


def grow_tree(X, g, h, rows, order, cfg: GbdtConfig) -> Tree:
    feature, threshold, left, right, value, gain = [], [], [], [], [], []

    def new_node():
        for lst, v in ((feature, LEAF), (threshold, 0.0), (left, LEAF), (right, LEAF), (value, 0.0), (gain, 0.0)):
            lst.append(v)
        return len(feature) - 1

    stack = [(new_node(), rows, 0)]
    while stack:
        node, node_rows, depth = stack.pop()
        G, H = g[node_rows].sum(), h[node_rows].sum()
        value[node] = -G / (H + cfg.reg_lambda)
        if depth >= cfg.max_depth:
            continue
        best_gain, f, thr = _best_split(X, g, h, node_rows, order, cfg)
        if f == LEAF or best_gain <= 0.0:
            continue
        go_left = X[node_rows, f] <= thr
        feature[node], threshold[node], gain[node] = f, thr, best_gain
        left[node], right[node] = new_node(), new_node()
        # push right first so the left subtree gets the lower node ids
        stack.append((right[node], node_rows[~go_left], depth + 1))
        stack.append((left[node], node_rows[go_left], depth + 1))
    return Tree(
        np.asarray(feature, dtype=np.int64),
        np.asarray(threshold, dtype=np.float64),
        np.asarray(left, dtype=np.int64),
        np.asarray(right, dtype=np.int64),
        np.asarray(value, dtype=np.float64),
        np.asarray(gain, dtype=np.float64),
    )


def log_loss(y, raw) -> float:
    # log(1 + e^raw) - y * raw, computed stably
    return float(np.mean(np.logaddexp(0.0, raw) - y * raw))


@dataclass
class GbdtModel:
    base_score: float
    learning_rate: float
    n_features: int
    trees: list[Tree] = field(default_factory=list)
    train_loss: list[float] = field(default_factory=list, repr=False)

    def decision_function(self, X) -> np.ndarray:
        X = check_feature_matrix(X)
        if X.shape[1] != self.n_features:
            raise ShapeError(f"expected {self.n_features} features, got {X.shape[1]}")
        raw = np.full(len(X), self.base_score)
        for tree in self.trees:
            raw += self.learning_rate * tree.predict(X)
        return raw

    def predict_proba(self, X) -> np.ndarray:
        """P(member) for each row."""
        return expit(self.decision_function(X))

    def predict_label(self, X, threshold: float = 0.5) -> np.ndarray:
        """1 where ``predict_proba >= threshold`` (ties go to the member class)."""
        return (self.predict_proba(X) >= threshold).astype(np.int64)

    # text dump --------------------------------------------------------
    def dumps(self) -> str:
        lines = [
            "gbdt 1",
            f"n_features {self.n_features}",
            f"base_score {self.base_score.hex()}",
            f"learning_rate {float(self.learning_rate).hex()}",
            f"n_trees {len(self.trees)}",
        ]
        for t, tree in enumerate(self.trees):
            lines.append(f"tree {t} {tree.n_nodes}")
            for i in range(tree.n_nodes):
                lines.append(
                    f"{i} {tree.feature[i]} {float(tree.threshold[i]).hex()} "
                    f"{tree.left[i]} {tree.right[i]} {float(tree.value[i]).hex()} {float(tree.gain[i]).hex()}"
                )
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> GbdtModel:
        lines = iter(text.splitlines())

        def field_of(expected):
            key, val = next(lines).split()
            if key != expected:
                raise ShapeError(f"malformed tree dump: expected {expected!r}, got {key!r}")
            return val

        if next(lines).split() != ["gbdt", "1"]:
            raise ShapeError("not a gbdt dump (version 1)")
        n_features = int(field_of("n_features"))
        base = float.fromhex(field_of("base_score"))
        lr = float.fromhex(field_of("learning_rate"))
        n_trees = int(field_of("n_trees"))
        trees = []
        for _ in range(n_trees):
            _, _, n_nodes = next(lines).split()
            rows = [next(lines).split() for _ in range(int(n_nodes))]
            trees.append(
                Tree(
                    np.array([int(r[1]) for r in rows], dtype=np.int64),
                    np.array([float.fromhex(r[2]) for r in rows]),
                    np.array([int(r[3]) for r in rows], dtype=np.int64),
                    np.array([int(r[4]) for r in rows], dtype=np.int64),
                    np.array([float.fromhex(r[5]) for r in rows]),
                    np.array([float.fromhex(r[6]) for r in rows]),
                )
            )
        return cls(base, lr, n_features, trees)


def train(X, y, cfg: GbdtConfig = GbdtConfig()) -> GbdtModel:
    """Fit boosted trees to 0/1 labels ``y``. Deterministic given ``cfg.rng_seed``."""
    X = check_feature_matrix(X)
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if len(y) != len(X):
        raise ShapeError(f"{len(X)} rows but {len(y)} labels")
    if not np.isin(y, (0.0, 1.0)).all():
        raise ConfigurationError("labels must be 0 or 1")
    prior = y.mean() if len(y) else 0.0
    if prior in (0.0, 1.0):
        raise DegenerateDataError("training rows must contain both classes")

    rng = np.random.default_rng(cfg.rng_seed)
    model = GbdtModel(float(np.log(prior / (1 - prior))), cfg.learning_rate, X.shape[1])
    order = [np.argsort(X[:, f], kind="stable") for f in range(X.shape[1])]
    raw = np.full(len(y), model.base_score)
    model.train_loss.append(log_loss(y, raw))
    n_sub = max(1, int(round(cfg.subsample * len(y))))
    all_rows = np.arange(len(y))
    for _ in range(cfg.n_trees):
        p = expit(raw)
        g, h = p - y, p * (1.0 - p)
        rows = all_rows if n_sub == len(y) else np.sort(rng.choice(len(y), size=n_sub, replace=False))
        tree = grow_tree(X, g, h, rows, order, cfg)
        model.trees.append(tree)
        raw = raw + cfg.learning_rate * tree.predict(X)
        model.train_loss.append(log_loss(y, raw))
    return model


class BoostedTreesClassifier(ClassifierMixin, BaseEstimator):
    """Scikit-learn front end to :func:`train`; ``classes_`` is always ``[0, 1]``."""

    def __init__(
        self,
        n_trees=100,
        max_depth=3,
        learning_rate=0.1,
        min_samples_leaf=5,
        subsample=1.0,
        reg_lambda=1.0,
        rng_seed=0,
    ):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.learning_rate = learning_rate
        self.min_samples_leaf = min_samples_leaf
        self.subsample = subsample
        self.reg_lambda = reg_lambda
        self.rng_seed = rng_seed

    def fit(self, X, y):
        self.model_ = train(X, y, GbdtConfig(**self.get_params()))
        self.classes_ = np.array([0, 1])
        self.n_features_in_ = self.model_.n_features
        return self

    def decision_function(self, X):
        check_is_fitted(self, "model_")
        return self.model_.decision_function(X)

    def predict_proba(self, X):
        p = expit(self.decision_function(X))
        return np.column_stack([1.0 - p, p])

    def predict(self, X, threshold=0.5):
        return (self.predict_proba(X)[:, 1] >= threshold).astype(np.int64)
