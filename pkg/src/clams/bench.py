"""Clustering techniques, internal validation metrics, and rank stability of techniques across datasets."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.cluster.hierarchy import linkage

from .core import Clustering, Scatterplot, as_labels
from .errors import AllRunsFailed, PreconditionError, SingleCluster
from .evm import spearman_rho
from .gmm import kmeans_pp_seeds
from .search import Param, Space, cached, random_search


def _points(plot) -> np.ndarray:
    return plot.points if isinstance(plot, Scatterplot) else np.asarray(plot, dtype=float)


def _cluster_ids(labels: np.ndarray) -> np.ndarray:
    uniq = np.unique(labels)
    if len(uniq) < 2:
        raise SingleCluster("need at least 2 clusters")
    return uniq


def silhouette(plot, labels) -> float:
    """Mean silhouette width; points alone in their cluster contribute 0."""
    pts = _points(plot)
    lab = as_labels(labels)
    if len(pts) < 3:
        raise PreconditionError("silhouette needs at least 3 points")
    uniq = _cluster_ids(lab)
    idx = np.searchsorted(uniq, lab)
    k = len(uniq)
    counts = np.bincount(idx, minlength=k).astype(float)
    n = len(pts)
    sums = np.zeros((n, k))
    sq = (pts**2).sum(axis=1)
    for start in range(0, n, 2048):
        block = pts[start:start + 2048]
        d2 = sq[start:start + 2048, None] + sq[None, :] - 2.0 * block @ pts.T
        d = np.sqrt(np.maximum(d2, 0.0))
        d[np.arange(len(block)), np.arange(start, start + len(block))] = 0.0
        for j in range(k):
            sums[start:start + len(block), j] = d[:, idx == j].sum(axis=1)
    own = counts[idx]
    a = np.where(own > 1, sums[np.arange(n), idx] / np.maximum(own - 1, 1), 0.0)
    other = sums / counts[None, :]
    other[np.arange(n), idx] = np.inf
    b = other.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def calinski_harabasz(plot, labels) -> float:
    """Between/within dispersion ratio; +inf when every cluster is a single repeated point."""
    pts = _points(plot)
    lab = as_labels(labels)
    uniq = _cluster_ids(lab)
    n, k = len(pts), len(uniq)
    if k >= n:
        raise PreconditionError("calinski_harabasz needs fewer clusters than points")
    mean = pts.mean(axis=0)
    between = within = 0.0
    for u in uniq:
        members = pts[lab == u]
        c = members.mean(axis=0)
        between += len(members) * float(((c - mean) ** 2).sum())
        within += float(((members - c) ** 2).sum())
    if within == 0.0:
        return math.inf
    return (between / (k - 1)) / (within / (n - k))


METRICS: dict[str, Callable] = {"silhouette": silhouette, "ch": calinski_harabasz}


def _relabel(labels: np.ndarray) -> np.ndarray:
    """Renumber clusters 0.. in order of first appearance."""
    _, first, inv = np.unique(labels, return_index=True, return_inverse=True)
    order = np.argsort(np.argsort(first))
    return order[inv]


def kmeans_objective(pts: np.ndarray, labels: np.ndarray, centers: np.ndarray) -> float:
    return float(((pts - centers[labels]) ** 2).sum())


def kmeans(plot, k: int, seed: int = 0, tol: float = 1e-6, max_iter: int = 300, history: list | None = None) -> Clustering:
    """Lloyd iterations from k-means++ seeds. Empty clusters take the point farthest from its center."""
    pts = _points(plot)
    n = len(pts)
    if not 2 <= k <= n:
        raise PreconditionError(f"k must lie in [2, {n}]")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, k, 0xC1]))
    centers = kmeans_pp_seeds(pts, k, rng)
    sq = (pts**2).sum(axis=1)
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        d2 = sq[:, None] - 2.0 * pts @ centers.T + (centers**2).sum(axis=1)[None, :]
        labels = np.argmin(d2, axis=1)
        if history is not None:
            history.append(kmeans_objective(pts, labels, centers))
        counts = np.bincount(labels, minlength=k)
        for j in np.flatnonzero(counts == 0):
            far = int(np.argmax(((pts - centers[labels]) ** 2).sum(axis=1)))
            counts[labels[far]] -= 1
            labels[far] = j
            counts[j] = 1
        new = np.column_stack([
            np.bincount(labels, weights=pts[:, 0], minlength=k),
            np.bincount(labels, weights=pts[:, 1], minlength=k),
        ]) / counts[:, None]
        shift = float(np.sqrt(((new - centers) ** 2).sum(axis=1)).max())
        centers = new
        if history is not None:
            history.append(kmeans_objective(pts, labels, centers))
        if shift <= tol:
            break
    d2 = sq[:, None] - 2.0 * pts @ centers.T + (centers**2).sum(axis=1)[None, :]
    return Clustering(_relabel(np.argmin(d2, axis=1)))


def merge_tree(plot, method: str) -> np.ndarray:
    if method not in ("single", "average", "complete"):
        raise PreconditionError(f"unknown linkage {method!r}")
    return linkage(_points(plot), method=method, metric="euclidean")


def cut_tree(merges: np.ndarray, n: int, k: int) -> np.ndarray:
    """Replay the first n - k merges of a linkage matrix; returns labels for k clusters."""
    parent = np.arange(2 * n - 1)

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for step in range(n - k):
        a, b = int(merges[step, 0]), int(merges[step, 1])
        node = n + step
        parent[find(a)] = node
        parent[find(b)] = node
    roots = np.array([find(i) for i in range(n)])
    return _relabel(roots)


def agglomerative(plot, k: int, linkage_method: str = "average") -> Clustering:
    pts = _points(plot)
    n = len(pts)
    if not 1 <= k <= n:
        raise PreconditionError(f"k must lie in [1, {n}]")
    if k == n:
        return Clustering(np.arange(n))
    return Clustering(cut_tree(merge_tree(pts, linkage_method), n, k))


def default_space(n_points: int) -> dict[str, Param]:
    return {"k": Param(2, max(2, math.isqrt(n_points)), integer=True)}


@dataclass(frozen=True)
class ClusteringTechnique:
    name: str
    run: Callable[[np.ndarray, dict, int], Clustering]
    space: Callable[[int], Space] = default_space
    # techniques that ignore the seed can share one tree/fit across many k
    prepare: Callable[[np.ndarray], object] | None = field(default=None, compare=False)


def _kmeans_run(pts, params, seed):
    return kmeans(pts, params["k"], seed)


def _linkage_technique(method: str) -> ClusteringTechnique:
    def run(pts, params, seed, _tree=None):
        k = params["k"]
        if k >= len(pts):
            return Clustering(np.arange(len(pts)))
        tree = _tree if _tree is not None else merge_tree(pts, method)
        return Clustering(cut_tree(tree, len(pts), k))

    return ClusteringTechnique(f"agglomerative-{method}", run, prepare=lambda pts: merge_tree(pts, method))


KMEANS = ClusteringTechnique("kmeans", _kmeans_run)
SINGLE = _linkage_technique("single")
AVERAGE = _linkage_technique("average")
COMPLETE = _linkage_technique("complete")
DEFAULT_TECHNIQUES = (KMEANS, SINGLE, AVERAGE, COMPLETE)


@dataclass(frozen=True)
class SearchOutcome:
    score: float
    params: dict
    trials: list


def search_technique(technique: ClusteringTechnique, plot, metric: str, budget: int, seed: int = 0) -> SearchOutcome:
    pts = _points(plot)
    score_fn = METRICS[metric]
    prepared = technique.prepare(pts) if technique.prepare is not None else None

    @cached
    def objective(params):
        if prepared is not None:
            labels = technique.run(pts, params, seed, prepared)
        else:
            labels = technique.run(pts, params, seed)
        return score_fn(pts, labels)

    best, trials = random_search(
        objective, technique.space(len(pts)), budget, seed, errors=(SingleCluster, PreconditionError)
    )
    if best is None:
        raise AllRunsFailed(f"{technique.name}: all {budget} runs failed")
    return SearchOutcome(best.value, best.params, trials)


def best_metric_score(technique: ClusteringTechnique, plot, metric: str = "silhouette", budget: int = 20, seed: int = 0) -> float:
    return search_technique(technique, plot, metric, budget, seed).score


def rank_techniques(scores: Mapping[str, float]) -> list[str]:
    """Best first; scores equal to 9 decimals tie and are then ordered by name."""
    return sorted(scores, key=lambda name: (-round(scores[name], 9), name))


def mean_pairwise_rho(rankings: Sequence[Sequence[str]]) -> float:
    names = sorted(rankings[0])
    positions = [[list(r).index(name) for name in names] for r in rankings]
    rhos = [spearman_rho(a, b) for a, b in itertools.combinations(positions, 2)]
    return float(np.mean(rhos))


@dataclass
class BenchReport:
    metric: str
    rankings: dict  # dataset id -> technique names, best first
    scores: dict  # dataset id -> {technique: best score}
    mean_rho: float

    def to_dict(self) -> dict:
        return {"metric": self.metric, "mean_rho": self.mean_rho, "rankings": self.rankings, "scores": self.scores}


def rank_stability(
    datasets: Sequence[Scatterplot],
    techniques: Sequence[ClusteringTechnique] = DEFAULT_TECHNIQUES,
    metric: str = "silhouette",
    budget: int = 20,
    seed: int = 0,
) -> BenchReport:
    if len(datasets) < 2:
        raise PreconditionError("need at least 2 datasets")
    if len(techniques) < 3:
        raise PreconditionError("need at least 3 techniques")
    rankings, scores = {}, {}
    for i, plot in enumerate(datasets):
        key = plot.id or f"dataset-{i}"
        if key in scores:
            key = f"{key}#{i}"
        scores[key] = {t.name: best_metric_score(t, plot, metric, budget, seed) for t in techniques}
        rankings[key] = rank_techniques(scores[key])
    return BenchReport(metric, rankings, scores, mean_pairwise_rho(list(rankings.values())))
