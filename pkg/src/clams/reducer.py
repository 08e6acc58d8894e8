"""Accuracy-constrained ambiguity reduction of 2-D embeddings.

Phase 1 picks the embedding hyperparameters that maximize an accuracy metric.
Phase 2 then searches for hyperparameters with the lowest cluster-ambiguity
score among those whose accuracy stays within `tau` of the phase-1 accuracy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.spatial import cKDTree

from .ambiguity import clams_score
from .bench import kmeans
from .core import Scatterplot
from .errors import KTooLarge, NonFinite, PreconditionError
from .gmm import GmmFitConfig
from .search import Param, Space, random_search
from .separability import SeparabilityModel


@dataclass(frozen=True)
class HighDimDataset:
    rows: np.ndarray

    def __post_init__(self):
        rows = np.array(self.rows, dtype=float)
        if rows.ndim != 2 or rows.shape[1] < 2 or rows.shape[0] < 3:
            raise PreconditionError("need an (N, d) array with N >= 3 and d >= 2")
        if not np.all(np.isfinite(rows)):
            raise NonFinite("high-dimensional data must be finite")
        rows.setflags(write=False)
        object.__setattr__(self, "rows", rows)

    def __len__(self):
        return self.rows.shape[0]


@dataclass(frozen=True)
class Embedder:
    name: str
    space: Space
    embed: Callable[[HighDimDataset, dict, int], Scatterplot]


@dataclass(frozen=True)
class AccuracyMetric:
    name: str
    eval: Callable[[HighDimDataset, Scatterplot], float]


@dataclass(frozen=True)
class ReducerConfig:
    tau: float = 0.05
    budget_phase1: int = 40
    budget_phase2: int = 80
    seed: int = 0
    # embeddings are scored ~100 times per run, so the decomposition is kept light
    gmm: GmmFitConfig = field(default_factory=lambda: GmmFitConfig(k_max=10, restarts=2))

    def __post_init__(self):
        if self.tau <= 0:
            raise PreconditionError("tau must be > 0")
        if self.budget_phase1 < 1 or self.budget_phase2 < 1:
            raise PreconditionError("budgets must be >= 1")


def pca_project(Z: np.ndarray) -> np.ndarray:
    """Top-2 principal-component scores with a deterministic sign per axis."""
    centered = Z - Z.mean(axis=0)
    _, _, vt = np.linalg.svd(centered, full_matrices=False)
    axes = vt[:2]
    # flip each axis so its largest-magnitude loading is positive
    signs = np.sign(axes[np.arange(2), np.abs(axes).argmax(axis=1)])
    return centered @ (axes * signs[:, None]).T


def toy_embedder(Z: HighDimDataset, h: Mapping[str, float], seed: int = 0) -> Scatterplot:
    """PCA projection, per-axis scaling, pull toward k-means(sqrt N) centroids, Gaussian jitter.

    `h` keys: scale1, scale2, jitter (sd as a fraction of the projection's RMS
    spread), contraction (fraction of the way to the centroid, in [0, 1]).
    """
    proj = pca_project(Z.rows) * np.array([h.get("scale1", 1.0), h.get("scale2", 1.0)])
    gamma = float(h.get("contraction", 0.0))
    if gamma > 0:
        k = max(2, min(math.isqrt(len(proj)), len(proj)))
        labels = kmeans(proj, k, seed).labels
        centroids = np.array([proj[labels == j].mean(axis=0) for j in range(labels.max() + 1)])
        proj = proj + gamma * (centroids[labels] - proj)
    jitter = float(h.get("jitter", 0.0))
    if jitter > 0:
        rms = math.sqrt(float((proj - proj.mean(axis=0)).var(axis=0).sum()) / 2.0)
        rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x717]))
        proj = proj + rng.normal(0.0, jitter * rms, proj.shape)
    return Scatterplot(proj, id="embedding")


TOY_SPACE = {
    "scale1": Param(0.5, 2.0),
    "scale2": Param(0.5, 2.0),
    "jitter": Param(0.0, 0.3),
    "contraction": Param(0.0, 0.9),
}
TOY_EMBEDDER = Embedder("toy-pca", TOY_SPACE, toy_embedder)


def _knn(points: np.ndarray, k: int) -> np.ndarray:
    _, idx = cKDTree(points).query(points, k=k + 1)
    out = np.empty((len(points), k), dtype=np.int64)
    for i, row in enumerate(idx):
        row = row[row != i]
        out[i] = row[:k]
    return out


def neighborhood_f1(Z: HighDimDataset, plot: Scatterplot, k: int = 10) -> float:
    """F1 of k-nearest-neighbor sets in the data versus in the embedding."""
    n = len(Z)
    if k >= n:
        raise KTooLarge(f"k={k} must be below the point count {n}")
    if plot.n != n:
        raise PreconditionError("embedding and data differ in point count")
    high, low = _knn(Z.rows, k), _knn(plot.points, k)
    hits = (high[:, :, None] == low[:, None, :]).sum(axis=(1, 2))
    precision = float((hits / low.shape[1]).mean())
    recall = float((hits / high.shape[1]).mean())
    if precision + recall == 0:
        return 0.0
    return 2.0 * precision * recall / (precision + recall)


NEIGHBORHOOD_F1 = AccuracyMetric("neighborhood-f1", lambda Z, plot: neighborhood_f1(Z, plot, 10))


def constrained_loss(
    h: Mapping,
    h1: Mapping,
    Z: HighDimDataset,
    embedder: Embedder,
    metric: AccuracyMetric,
    model: SeparabilityModel,
    tau: float,
    seed: int = 0,
    gmm_cfg: GmmFitConfig | None = None,
    reference_accuracy: float | None = None,
) -> float:
    """Ambiguity score of the h embedding, or +inf once its accuracy drifts more than tau from h1's.

    A drift of exactly tau is accepted.
    """
    gmm_cfg = gmm_cfg if gmm_cfg is not None else ReducerConfig().gmm
    if reference_accuracy is None:
        reference_accuracy = metric.eval(Z, embedder.embed(Z, dict(h1), seed))
    emb = embedder.embed(Z, dict(h), seed)
    if abs(metric.eval(Z, emb) - reference_accuracy) > tau:
        return math.inf
    return clams_score(emb, model, gmm_cfg).score


@dataclass
class ReductionResult:
    h1: dict
    intermediate: Scatterplot
    h2: dict
    final: Scatterplot
    report: dict


def optimize(
    Z: HighDimDataset,
    embedder: Embedder,
    metric: AccuracyMetric,
    model: SeparabilityModel,
    cfg: ReducerConfig = ReducerConfig(),
) -> ReductionResult:
    seed = cfg.seed
    p1_best, p1_trials = random_search(
        lambda h: metric.eval(Z, embedder.embed(Z, h, seed)),
        embedder.space,
        cfg.budget_phase1,
        seed,
        maximize=True,
    )
    h1 = p1_best.params
    intermediate = embedder.embed(Z, h1, seed)
    acc1 = metric.eval(Z, intermediate)
    clams1 = clams_score(intermediate, model, cfg.gmm).score

    records = {}

    def phase2(h):
        emb = embedder.embed(Z, h, seed)
        acc = metric.eval(Z, emb)
        if abs(acc - acc1) > cfg.tau:
            records[len(records)] = (acc, math.inf)
            return math.inf
        score = clams1 if h == h1 else clams_score(emb, model, cfg.gmm).score
        records[len(records)] = (acc, score)
        return score

    # h1 is the first phase-2 candidate, so a finite optimum always exists
    p2_best, p2_trials = random_search(
        phase2, embedder.space, cfg.budget_phase2, seed + 1, initial=(h1,), maximize=False
    )
    h2 = p2_best.params
    final = embedder.embed(Z, h2, seed)
    acc2, clams2 = records[p2_best.index]
    report = {
        "embedder": embedder.name,
        "metric": metric.name,
        "tau": cfg.tau,
        "h1": h1,
        "h2": h2,
        "accuracy_intermediate": acc1,
        "accuracy_final": acc2,
        "clams_intermediate": clams1,
        "clams_final": clams2,
        "feasible_candidates": sum(1 for a, s in records.values() if math.isfinite(s)),
        "budgets": [cfg.budget_phase1, cfg.budget_phase2],
    }
    return ReductionResult(h1, intermediate, h2, final, report)
