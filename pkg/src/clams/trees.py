"""Depth-limited least-squares regression trees and a flat, vectorized ensemble evaluator."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class Tree:
    """Nodes in preorder; `feature == -1` marks a leaf. Samples with x <= threshold go left."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def predict(self, X: np.ndarray) -> np.ndarray:
        return Ensemble([self], [1.0], 0.0).predict_raw(X)

    def to_nodes(self) -> list[dict]:
        return [
            {
                "feature_index": int(self.feature[i]),
                "threshold": float(self.threshold[i]),
                "left": int(self.left[i]),
                "right": int(self.right[i]),
                "leaf_value": float(self.value[i]),
            }
            for i in range(self.n_nodes)
        ]

    @classmethod
    def from_nodes(cls, nodes: list[dict]) -> "Tree":
        return cls(
            np.array([n["feature_index"] for n in nodes], dtype=np.int64),
            np.array([n["threshold"] for n in nodes], dtype=float),
            np.array([n["left"] for n in nodes], dtype=np.int64),
            np.array([n["right"] for n in nodes], dtype=np.int64),
            np.array([n["leaf_value"] for n in nodes], dtype=float),
        )


def _best_split(X, r, min_leaf):
    n, d = X.shape
    total = r.sum()
    base = total * total / n
    best = (0.0, -1, 0.0)
    lo, hi = min_leaf, n - min_leaf
    if hi < lo:
        return best
    pos = np.arange(lo, hi + 1)
    for f in range(d):
        order = np.argsort(X[:, f], kind="stable")
        xs = X[order, f]
        csum = np.cumsum(r[order])
        left_sum = csum[pos - 1]
        gain = left_sum**2 / pos + (total - left_sum) ** 2 / (n - pos) - base
        gain[xs[pos - 1] >= xs[np.minimum(pos, n - 1)]] = -np.inf
        j = int(np.argmax(gain))
        if gain[j] > best[0]:
            i = pos[j]
            thr = 0.5 * (xs[i - 1] + xs[i])
            if not xs[i - 1] <= thr < xs[i]:
                thr = xs[i - 1]
            best = (float(gain[j]), f, float(thr))
    return best


def fit_tree(X: np.ndarray, r: np.ndarray, max_depth: int, min_leaf: int) -> Tree:
    """Greedy exact-split regression tree on squared loss."""
    feature, threshold, left, right, value = [], [], [], [], []
    tol = 1e-12 * max(float(np.dot(r, r)), 1e-300)

    def grow(idx, depth):
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(float(r[idx].mean()))
        if depth >= max_depth or len(idx) < 2 * min_leaf:
            return node
        gain, f, thr = _best_split(X[idx], r[idx], min_leaf)
        if f < 0 or gain <= tol:
            return node
        go_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        left[node] = grow(idx[go_left], depth + 1)
        right[node] = grow(idx[~go_left], depth + 1)
        return node

    grow(np.arange(len(r)), 0)
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=float),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=float),
    )


class Ensemble:
    """Weighted sum of trees plus a base score, evaluated for all trees at once."""

    def __init__(self, trees, weights, base_score):
        self.trees = list(trees)
        self.weights = np.array(weights, dtype=float)
        self.base_score = float(base_score)
        t = len(self.trees)
        width = max((tr.n_nodes for tr in self.trees), default=1)
        self._feature = np.full((t, width), -1, dtype=np.int64)
        self._threshold = np.zeros((t, width))
        self._left = np.zeros((t, width), dtype=np.int64)
        self._right = np.zeros((t, width), dtype=np.int64)
        self._value = np.zeros((t, width))
        self._depth = 0
        for i, tr in enumerate(self.trees):
            m = tr.n_nodes
            self._feature[i, :m] = tr.feature
            self._threshold[i, :m] = tr.threshold
            self._left[i, :m] = tr.left
            self._right[i, :m] = tr.right
            self._value[i, :m] = tr.value
            self._depth = max(self._depth, m)

    def leaf_values(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        n, t = X.shape[0], len(self.trees)
        rows = np.arange(t)[None, :]
        node = np.zeros((n, t), dtype=np.int64)
        for _ in range(self._depth):
            f = self._feature[rows, node]
            inner = f >= 0
            if not inner.any():
                break
            xv = np.take_along_axis(X, np.where(inner, f, 0), axis=1)
            go_left = xv <= self._threshold[rows, node]
            nxt = np.where(go_left, self._left[rows, node], self._right[rows, node])
            node = np.where(inner, nxt, node)
        return self._value[rows, node]

    def predict_raw(self, X: np.ndarray) -> np.ndarray:
        if not self.trees:
            return np.full(np.atleast_2d(X).shape[0], self.base_score)
        # fixed left-to-right accumulation keeps results bit-stable across save/load
        leaves = self.leaf_values(X)
        out = np.full(leaves.shape[0], self.base_score)
        for i in range(leaves.shape[1]):
            out += self.weights[i] * leaves[:, i]
        return out
