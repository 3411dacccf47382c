"""CART decision trees and random forests.

Splits minimise the weighted Gini impurity over midpoints between sorted
distinct feature values; samples with ``x[f] <= threshold`` go left. Among
equally good splits the lowest feature index wins, then the lowest threshold.

Forest trees are grown on bootstrap resamples. At every node a uniformly
random subset of ``ceil(sqrt(n))`` non-constant features is drawn (partial
Fisher-Yates driven by a splitmix64 stream seeded per tree), so each tree is a
pure function of the forest seed and its index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import List, Optional, Union

import numpy as np
from numba import njit

from .._seeding import derive_seed, make_rng
from ._base import as_values, check_width, encode, split_xy

_U64 = (1 << 64) - 1


@njit(cache=True)
def _splitmix(state):
    state = state + np.uint64(0x9E3779B97F4A7C15)
    z = state
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    z = z ^ (z >> np.uint64(31))
    return state, z


@njit(cache=True)
def _find_split(X, y, idx, perm, max_features, n_classes, min_leaf, state):
    n = X.shape[1]
    m = idx.shape[0]
    total = np.zeros(n_classes)
    for i in range(m):
        total[y[idx[i]]] += 1.0

    chosen = np.empty(max_features, np.int64)
    n_chosen = 0
    j = 0
    while j < n and n_chosen < max_features:
        if max_features < n:
            state, r = _splitmix(state)
            k = j + np.int64(r % np.uint64(n - j))
            tmp = perm[j]
            perm[j] = perm[k]
            perm[k] = tmp
        f = perm[j]
        j += 1
        v0 = X[idx[0], f]
        for i in range(1, m):
            if X[idx[i], f] != v0:
                chosen[n_chosen] = f
                n_chosen += 1
                break
    feats = np.sort(chosen[:n_chosen])

    best_f = -1
    best_t = 0.0
    best_score = np.inf
    vals = np.empty(m)
    left = np.zeros(n_classes)
    for f in feats:
        for i in range(m):
            vals[i] = X[idx[i], f]
        order = np.argsort(vals, kind="mergesort")
        left[:] = 0.0
        for i in range(m - 1):
            left[y[idx[order[i]]]] += 1.0
            a = vals[order[i]]
            b = vals[order[i + 1]]
            if a == b:
                continue
            nl = i + 1
            nr = m - nl
            if nl < min_leaf or nr < min_leaf:
                continue
            sl = 0.0
            sr = 0.0
            for c in range(n_classes):
                sl += left[c] * left[c]
                rc = total[c] - left[c]
                sr += rc * rc
            score = m - sl / nl - sr / nr
            if score < best_score:
                best_score = score
                best_f = f
                t = 0.5 * (a + b)
                if t >= b:
                    t = a
                best_t = t
    return best_f, best_t, state


@njit(cache=True)
def _apply(X, feature, threshold, left, right):
    out = np.empty(X.shape[0], np.int64)
    for i in range(X.shape[0]):
        node = 0
        while feature[node] >= 0:
            if X[i, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[i] = node
    return out


@dataclass(frozen=True, eq=False)
class TreeArrays:
    """Flat node arrays; leaves have ``feature == -1``.

    ``value`` holds per-node class counts (bootstrap-weighted) and ``cover``
    the number of training rows reaching the node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    @property
    def proba(self) -> np.ndarray:
        return self.value / self.value.sum(axis=1, keepdims=True)

    def apply(self, X: np.ndarray) -> np.ndarray:
        return _apply(X, self.feature, self.threshold, self.left, self.right)

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())


def grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    n_classes: int,
    sample_idx: Optional[np.ndarray] = None,
    max_depth: Optional[int] = None,
    min_leaf: int = 1,
    max_features: Optional[int] = None,
    seed: int = 0,
) -> TreeArrays:
    X = np.ascontiguousarray(X, dtype=float)
    y = np.ascontiguousarray(y, dtype=np.int64)
    n = X.shape[1]
    if sample_idx is None:
        sample_idx = np.arange(X.shape[0], dtype=np.int64)
    mf = n if max_features is None else max(1, min(int(max_features), n))
    perm = np.arange(n, dtype=np.int64)
    state = np.uint64(seed & _U64)

    feature, threshold, left, right, value, cover = [], [], [], [], [], []
    stack = [(np.asarray(sample_idx, dtype=np.int64), 0, -1, False)]
    while stack:
        idx, depth, parent, is_right = stack.pop()
        nid = len(feature)
        if parent >= 0:
            (right if is_right else left)[parent] = nid
        counts = np.bincount(y[idx], minlength=n_classes).astype(float)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(counts)
        cover.append(float(idx.shape[0]))
        if (
            (max_depth is not None and depth >= max_depth)
            or np.count_nonzero(counts) <= 1
            or idx.shape[0] < 2 * min_leaf
        ):
            continue
        f, t, state = _find_split(X, y, idx, perm, mf, n_classes, min_leaf, state)
        state = np.uint64(state)
        if f < 0:
            continue
        feature[nid] = int(f)
        threshold[nid] = float(t)
        goes_left = X[idx, f] <= t
        stack.append((idx[~goes_left], depth + 1, nid, True))
        stack.append((idx[goes_left], depth + 1, nid, False))

    return TreeArrays(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=float).reshape(len(value), n_classes),
        np.array(cover, dtype=float),
    )


@dataclass(frozen=True, eq=False)
class TreeModel:
    classes: np.ndarray
    tree: TreeArrays
    n_features: int
    max_depth: Optional[int]
    min_leaf: int
    seed: int
    family = "tree"

    def predict_proba(self, data) -> np.ndarray:
        X = check_width(as_values(data), self.n_features)
        return self.tree.proba[self.tree.apply(X)]

    def predict(self, data) -> np.ndarray:
        X = as_values(data)
        if X.shape[0] == 0:
            return self.classes[:0]
        return self.classes[np.argmax(self.predict_proba(X), axis=1)]


def fit_tree(train, labels=None, max_depth: Optional[int] = None, min_leaf: int = 1, seed: int = 0) -> TreeModel:
    """Greedy CART over all features (deterministic; ``seed`` is recorded only)."""
    X, lab = split_xy(train, labels)
    if X.shape[0] < 1:
        raise ValueError("need at least one sample")
    classes, y = encode(lab)
    tree = grow_tree(X, y, classes.shape[0], max_depth=max_depth, min_leaf=min_leaf, seed=seed)
    return TreeModel(classes, tree, X.shape[1], max_depth, int(min_leaf), int(seed))


def resolve_max_features(policy: Union[str, int, None], n: int) -> int:
    if policy is None or policy == "all":
        return n
    if policy == "sqrt":
        return max(1, math.ceil(math.sqrt(n)))
    if isinstance(policy, str):
        raise ValueError(f"unknown max_features policy {policy!r}")
    return max(1, min(int(policy), n))


@dataclass(frozen=True, eq=False)
class ForestModel:
    classes: np.ndarray
    trees: List[TreeArrays]
    n_features: int
    tree_count: int
    max_depth: Optional[int]
    min_leaf: int
    max_features: Union[str, int, None]
    bootstrap: bool
    seed: int
    family = "forest"

    def leaf_proba(self, X: np.ndarray) -> np.ndarray:
        """Per-tree leaf class probabilities, shape ``(trees, rows, classes)``."""
        return np.stack([t.proba[t.apply(X)] for t in self.trees])

    def predict_proba(self, data) -> np.ndarray:
        X = check_width(as_values(data), self.n_features)
        return self.leaf_proba(X).mean(axis=0)

    def predict(self, data) -> np.ndarray:
        X = as_values(data)
        if X.shape[0] == 0:
            return self.classes[:0]
        X = check_width(X, self.n_features)
        n_classes = self.classes.shape[0]
        votes = np.zeros((X.shape[0], n_classes))
        rows = np.arange(X.shape[0])
        for t in self.trees:
            codes = np.argmax(t.value[t.apply(X)], axis=1)
            votes[rows, codes] += 1.0
        return self.classes[np.argmax(votes, axis=1)]


def fit_forest(
    train,
    labels=None,
    tree_count: int = 100,
    max_depth: Optional[int] = None,
    seed: int = 0,
    max_features: Union[str, int, None] = "sqrt",
    bootstrap: bool = True,
    min_leaf: int = 1,
) -> ForestModel:
    X, lab = split_xy(train, labels)
    if X.shape[0] < 2:
        raise ValueError("a forest needs at least two samples")
    classes, y = encode(lab)
    X = np.ascontiguousarray(X, dtype=float)
    n_rows, n = X.shape
    mf = resolve_max_features(max_features, n)
    trees = []
    for t in range(int(tree_count)):
        if bootstrap:
            rng = make_rng(derive_seed(seed, "bootstrap", t))
            sample_idx = rng.integers(0, n_rows, n_rows)
        else:
            sample_idx = np.arange(n_rows, dtype=np.int64)
        trees.append(
            grow_tree(
                X, y, classes.shape[0], sample_idx, max_depth, min_leaf, mf,
                derive_seed(seed, "split", t),
            )
        )
    return ForestModel(
        classes, trees, n, int(tree_count), max_depth, int(min_leaf), max_features, bool(bootstrap), int(seed)
    )
