"""Ensembles of randomized decision trees for binary classification.

Two split modes share one growing procedure:

* ``random`` — extremely randomized: each candidate feature gets one
  threshold drawn uniformly between its node-min and node-max.
* ``best`` — classic exhaustive mode: each candidate feature is scored at
  every midpoint between consecutive sorted unique values and keeps its best.

Candidates are scored by impurity decrease (entropy in bits, or Gini);
candidates that would create a child smaller than ``min_samples_leaf`` are
discarded, and if none survive the node becomes a leaf. Ties on gain go to
the earliest candidate in the sampled-feature visitation order. Routing is
``value <= threshold`` to the left child.

Each tree grows from its own child RNG stream spawned from the forest seed,
so changing ``n_estimators`` never reshuffles earlier trees and trees can be
grown in parallel.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from typing import Literal

import numpy as np

from .errors import (
    CorruptModelFile,
    DimensionMismatch,
    NaNFeature,
    SingleClassData,
    VersionMismatch,
)
from .prep import ScalerParams

FORMAT_VERSION = 1

Criterion = Literal["entropy", "gini"]
SplitMode = Literal["random", "best"]


@dataclass(frozen=True)
class ForestParams:
    """Hyperparameters; defaults reproduce the published best configuration."""

    n_estimators: int = 100
    criterion: Criterion = "entropy"
    max_features: float = 0.75
    min_samples_leaf: int = 4
    min_samples_split: int = 3
    bootstrap: bool = False
    split_mode: SplitMode = "random"
    seed: int = 0

    def __post_init__(self) -> None:
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.criterion not in ("entropy", "gini"):
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if not 0.0 < self.max_features <= 1.0:
            raise ValueError("max_features must be in (0, 1]")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.split_mode not in ("random", "best"):
            raise ValueError(f"unknown split_mode {self.split_mode!r}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 unsigned bits")

    def to_dict(self) -> dict:
        return {
            "n_estimators": self.n_estimators,
            "criterion": self.criterion,
            "max_features": self.max_features,
            "min_samples_leaf": self.min_samples_leaf,
            "min_samples_split": self.min_samples_split,
            "bootstrap": self.bootstrap,
            "split_mode": self.split_mode,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ForestParams":
        return cls(**d)


def entropy(pos: int, neg: int) -> float:
    """Binary entropy in bits; 0*log(0) := 0."""
    total = pos + neg
    if total < 1:
        raise ValueError("entropy needs at least one sample")
    h = 0.0
    for count in (pos, neg):
        if count > 0:
            p = count / total
            h -= p * math.log2(p)
    return h


def _impurity_vec(pos: np.ndarray, total: np.ndarray, criterion: str) -> np.ndarray:
    """Vectorized impurity for arrays of (positive count, total count)."""
    total = np.maximum(total, 1)
    p = pos / total
    q = 1.0 - p
    if criterion == "gini":
        return 2.0 * p * q
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -np.where(p > 0, p * np.log2(p), 0.0) - np.where(q > 0, q * np.log2(q), 0.0)
    return h


@dataclass
class Tree:
    """One grown tree as parallel flat arrays; node 0 is the root.

    Leaves have ``feature == -1`` and carry the positive fraction in ``value``.
    """

    feature: np.ndarray     # int32, -1 for leaves
    threshold: np.ndarray   # float64, NaN for leaves
    left: np.ndarray        # int32, -1 for leaves
    right: np.ndarray       # int32, -1 for leaves
    value: np.ndarray       # float64, positive fraction at leaves, NaN inside
    count: np.ndarray       # int64, samples that reached the node

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        while True:
            live = np.nonzero(self.feature[node] >= 0)[0]
            if live.size == 0:
                break
            cur = node[live]
            go_left = X[live, self.feature[cur]] <= self.threshold[cur]
            node[live] = np.where(go_left, self.left[cur], self.right[cur])
        return self.value[node]


class _TreeBuilder:
    def __init__(self, X: np.ndarray, y: np.ndarray, params: ForestParams,
                 rng: np.random.Generator):
        self.X = X
        self.y = y
        self.p = params
        self.rng = rng
        self.k = max(1, int(params.max_features * X.shape[1]))
        self.feature: list[int] = []
        self.threshold: list[float] = []
        self.left: list[int] = []
        self.right: list[int] = []
        self.value: list[float] = []
        self.count: list[int] = []

    def build(self, idx: np.ndarray) -> Tree:
        # explicit stack, right pushed first, so growth order is
        # depth-first with the left child expanded first
        stack: list[tuple[np.ndarray, int, bool]] = [(idx, -1, False)]
        while stack:
            node_idx, parent, is_left = stack.pop()
            node_id = self._new_node(node_idx, parent, is_left)
            split = self._choose_split(node_idx)
            if split is None:
                continue
            feat, thr, left_mask = split
            self.feature[node_id] = feat
            self.threshold[node_id] = thr
            self.value[node_id] = math.nan
            stack.append((node_idx[~left_mask], node_id, False))
            stack.append((node_idx[left_mask], node_id, True))
        return Tree(
            feature=np.asarray(self.feature, dtype=np.int32),
            threshold=np.asarray(self.threshold, dtype=np.float64),
            left=np.asarray(self.left, dtype=np.int32),
            right=np.asarray(self.right, dtype=np.int32),
            value=np.asarray(self.value, dtype=np.float64),
            count=np.asarray(self.count, dtype=np.int64),
        )

    def _new_node(self, node_idx: np.ndarray, parent: int, is_left: bool) -> int:
        node_id = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(math.nan)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(np.mean(self.y[node_idx])))
        self.count.append(int(node_idx.size))
        if parent >= 0:
            if is_left:
                self.left[parent] = node_id
            else:
                self.right[parent] = node_id
        return node_id

    def _choose_split(self, node_idx: np.ndarray):
        """Returns (feature, threshold, left_mask) or None for a leaf."""
        n = node_idx.size
        y_node = self.y[node_idx]
        n_pos = int(y_node.sum())
        if n < self.p.min_samples_split or n_pos == 0 or n_pos == n:
            return None
        X_node = self.X[node_idx]
        if np.all(X_node.min(axis=0) == X_node.max(axis=0)):
            return None  # every feature constant within the node

        feats = self.rng.choice(self.X.shape[1], size=self.k, replace=False)
        cols = X_node[:, feats]
        mins = cols.min(axis=0)
        maxs = cols.max(axis=0)
        usable = np.nonzero(mins < maxs)[0]
        if usable.size == 0:
            return None

        if self.p.split_mode == "random":
            thresholds = self.rng.uniform(mins[usable], maxs[usable])
            left_masks = cols[:, usable] <= thresholds[None, :]
            n_left = left_masks.sum(axis=0)
            pos_left = left_masks[y_node == 1].sum(axis=0)
        else:
            thresholds, n_left, pos_left = self._best_per_feature(
                cols, usable, y_node, n_pos)
            left_masks = None

        n_right = n - n_left
        pos_right = n_pos - pos_left
        parent_h = _impurity_vec(np.array([n_pos]), np.array([n]), self.p.criterion)[0]
        gains = (parent_h
                 - (n_left / n) * _impurity_vec(pos_left, n_left, self.p.criterion)
                 - (n_right / n) * _impurity_vec(pos_right, n_right, self.p.criterion))
        ok = (n_left >= self.p.min_samples_leaf) & (n_right >= self.p.min_samples_leaf)
        if not ok.any():
            return None
        gains = np.where(ok, gains, -np.inf)
        pick = int(np.argmax(gains))  # first max = sampled-feature visitation order
        assert gains[pick] >= -1e-12, "accepted split must not increase impurity"

        feat = int(feats[usable[pick]])
        thr = float(thresholds[pick])
        if left_masks is not None:
            left_mask = left_masks[:, pick]
        else:
            left_mask = cols[:, usable[pick]] <= thr
        return feat, thr, left_mask

    def _best_per_feature(self, cols, usable, y_node, n_pos):
        """Best-gain midpoint per usable feature (exhaustive split mode)."""
        n = cols.shape[0]
        thresholds = np.empty(usable.size)
        n_left = np.zeros(usable.size, dtype=np.int64)
        pos_left = np.zeros(usable.size, dtype=np.int64)
        parent_h = _impurity_vec(np.array([n_pos]), np.array([n]), self.p.criterion)[0]
        for j, u in enumerate(usable):
            col = cols[:, u]
            order = np.argsort(col, kind="stable")
            sc = col[order]
            sy = y_node[order]
            cut = np.nonzero(sc[:-1] < sc[1:])[0]
            nl = cut + 1
            pl = np.cumsum(sy)[cut]
            gains = (parent_h
                     - (nl / n) * _impurity_vec(pl, nl, self.p.criterion)
                     - ((n - nl) / n) * _impurity_vec(n_pos - pl, n - nl, self.p.criterion))
            best = int(np.argmax(gains))  # ties -> lowest midpoint
            mid = (sc[cut[best]] + sc[cut[best] + 1]) / 2.0
            if mid >= sc[cut[best] + 1]:  # midpoint rounded up to the right value
                mid = sc[cut[best]]
            thresholds[j] = mid
            n_left[j] = nl[best]
            pos_left[j] = pl[best]
        return thresholds, n_left, pos_left


@dataclass
class Forest:
    trees: list[Tree]
    params: ForestParams
    feature_dim: int
    scaler: ScalerParams | None = None
    l2_normalize: bool = True

    def with_scaler(self, scaler: ScalerParams, l2_normalize: bool) -> "Forest":
        return replace(self, scaler=scaler, l2_normalize=l2_normalize)


def _grow_one_tree(X: np.ndarray, y: np.ndarray, params: ForestParams,
                   seed_seq: np.random.SeedSequence) -> Tree:
    rng = np.random.Generator(np.random.PCG64(seed_seq))
    n = X.shape[0]
    if params.bootstrap:
        idx = np.sort(rng.integers(0, n, size=n))
    else:
        idx = np.arange(n)
    return _TreeBuilder(X, y, params, rng).build(idx)


def train_forest(features: np.ndarray, labels: np.ndarray,
                 params: ForestParams | None = None) -> Forest:
    params = params or ForestParams()
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError("features must be N x D with N labels")
    if not np.all(np.isfinite(X)):
        raise NaNFeature("training features contain NaN/Inf")
    if not np.all((y == 0) | (y == 1)):
        raise ValueError("labels must be 0 or 1")
    y = y.astype(np.int8)
    if y.min() == y.max():
        raise SingleClassData("training data contains a single class")
    if X.shape[0] < params.min_samples_split:
        raise ValueError("fewer samples than min_samples_split")

    master = np.random.SeedSequence(params.seed)
    children = master.spawn(params.n_estimators)
    trees = [_grow_one_tree(X, y, params, child) for child in children]
    return Forest(trees=trees, params=params, feature_dim=X.shape[1])


def predict_proba(forest: Forest, vec: np.ndarray) -> float:
    """Mean positive fraction of the reached leaves over all trees."""
    v = np.asarray(vec, dtype=np.float64)
    if v.shape != (forest.feature_dim,):
        raise DimensionMismatch(f"expected dim {forest.feature_dim}, got {v.shape}")
    return float(predict_proba_batch(forest, v[None, :])[0])


def predict_proba_batch(forest: Forest, X: np.ndarray) -> np.ndarray:
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != forest.feature_dim:
        raise DimensionMismatch(f"expected N x {forest.feature_dim}, got {X.shape}")
    acc = np.zeros(X.shape[0])
    for tree in forest.trees:
        acc += tree.predict(X)
    return acc / len(forest.trees)


def _tree_to_nodes(tree: Tree) -> list[dict]:
    nodes = []
    for i in range(tree.feature.size):
        if tree.feature[i] >= 0:
            nodes.append({
                "feature": int(tree.feature[i]),
                "threshold": float(tree.threshold[i]),
                "left": int(tree.left[i]),
                "right": int(tree.right[i]),
                "leaf_value": None,
                "count": int(tree.count[i]),
            })
        else:
            nodes.append({
                "feature": None,
                "threshold": None,
                "left": None,
                "right": None,
                "leaf_value": float(tree.value[i]),
                "count": int(tree.count[i]),
            })
    return nodes


def _tree_from_nodes(nodes: list[dict]) -> Tree:
    size = len(nodes)
    feature = np.full(size, -1, dtype=np.int32)
    threshold = np.full(size, math.nan)
    left = np.full(size, -1, dtype=np.int32)
    right = np.full(size, -1, dtype=np.int32)
    value = np.full(size, math.nan)
    count = np.zeros(size, dtype=np.int64)
    for i, node in enumerate(nodes):
        count[i] = node["count"]
        if node["feature"] is None:
            value[i] = node["leaf_value"]
        else:
            feature[i] = node["feature"]
            threshold[i] = node["threshold"]
            left[i] = node["left"]
            right[i] = node["right"]
    return Tree(feature, threshold, left, right, value, count)


def serialize_forest(forest: Forest) -> bytes:
    scaler = None
    if forest.scaler is not None:
        scaler = dict(forest.scaler.to_dict(), l2_normalize=forest.l2_normalize,
                      std_divisor="population")
    payload = {
        "format_version": FORMAT_VERSION,
        "params": forest.params.to_dict(),
        "scaler": scaler,
        "feature_dim": forest.feature_dim,
        "trees": [_tree_to_nodes(t) for t in forest.trees],
    }
    return (json.dumps(payload, sort_keys=True, separators=(",", ":")) + "\n").encode()


def load_forest(blob: bytes) -> Forest:
    try:
        payload = json.loads(blob)
        version = payload["format_version"]
        if version != FORMAT_VERSION:
            raise VersionMismatch(f"unknown model format_version {version!r}")
        params = ForestParams.from_dict(payload["params"])
        trees = [_tree_from_nodes(nodes) for nodes in payload["trees"]]
        scaler_dict = payload["scaler"]
        scaler = None
        l2 = True
        if scaler_dict is not None:
            scaler = ScalerParams(
                mean=np.asarray(scaler_dict["mean"]),
                std=np.asarray(scaler_dict["std"]),
                fitted_on=int(scaler_dict.get("fitted_on", 2)),
            )
            l2 = bool(scaler_dict.get("l2_normalize", True))
        forest = Forest(trees=trees, params=params,
                        feature_dim=int(payload["feature_dim"]),
                        scaler=scaler, l2_normalize=l2)
    except VersionMismatch:
        raise
    except Exception as exc:
        raise CorruptModelFile(f"cannot parse model file: {exc}") from exc
    if len(forest.trees) != params.n_estimators:
        raise CorruptModelFile("tree count differs from n_estimators")
    return forest
