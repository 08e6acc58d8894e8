"""Regression of perceived separability from pair features: training, CV, ablation, I/O.

The regressor is a gradient-boosted ensemble of shallow least-squares trees.
When no human-judged labels are available, `surrogate_separability` supplies
synthetic labels from the Bayes error of the two-component mixture; models
record which label source they were trained on.
"""

from __future__ import annotations

import hashlib
import itertools
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import FEATURE_NAMES, GaussianComponent, PairFeatures
from .errors import ChecksumMismatch, FormatVersionMismatch, PreconditionError, TooFewRows
from .features import DEFAULT_MASK, FeatureMask, feature_matrix
from .trees import Ensemble, Tree, fit_tree

MODEL_FORMAT_VERSION = 1
MIN_TRAINING_ROWS = 20
PROVENANCES = ("clustme", "synthetic-surrogate", "external")


@dataclass(frozen=True)
class TrainingSet:
    rows: tuple[tuple[PairFeatures, float], ...]
    provenance: str = "external"
    # generating component pairs, kept by the synthetic generator for re-labelling
    pairs: tuple = field(default=(), compare=False)

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple((f, float(s)) for f, s in self.rows))
        if self.provenance not in PROVENANCES:
            raise PreconditionError(f"unknown provenance {self.provenance!r}")
        for i, (_, s) in enumerate(self.rows):
            if not 0.0 <= s <= 1.0:
                raise PreconditionError(f"row {i}: label {s} outside [0, 1]")

    def __len__(self):
        return len(self.rows)

    def matrix(self, mask: FeatureMask = DEFAULT_MASK) -> np.ndarray:
        return feature_matrix([f for f, _ in self.rows], mask)

    @property
    def labels(self) -> np.ndarray:
        return np.array([s for _, s in self.rows], dtype=float)

    def subset(self, idx) -> "TrainingSet":
        return TrainingSet(tuple(self.rows[i] for i in idx), self.provenance)


@dataclass(frozen=True)
class TrainConfig:
    n_trees: int = 300
    max_depth: int = 3
    learning_rate: float = 0.05
    subsample: float = 0.8
    min_leaf: int = 5
    cv_folds: int = 5
    seed: int = 0

    def __post_init__(self):
        if min(self.n_trees, self.max_depth, self.min_leaf) < 1 or self.learning_rate <= 0:
            raise PreconditionError("n_trees, max_depth, min_leaf and learning_rate must be positive")
        if not 0.0 < self.subsample <= 1.0:
            raise PreconditionError("subsample must lie in (0, 1]")
        if self.cv_folds < 2:
            raise PreconditionError("cv_folds must be >= 2")

    def to_dict(self) -> dict:
        return dict(self.__dict__)


# n_trees x max_depth grid offered for parity experiments
CONFIG_GRID = tuple(itertools.product((100, 300), (2, 3, 4)))


class SeparabilityModel:
    """Trained ensemble mapping pair features to a separability score in [0, 1]."""

    def __init__(self, ensemble: Ensemble, mask: FeatureMask, training_meta: dict | None = None):
        self.ensemble = ensemble
        self.mask = mask
        self.training_meta = dict(training_meta or {})

    @property
    def base_score(self) -> float:
        return self.ensemble.base_score

    @property
    def provenance(self) -> str:
        return self.training_meta.get("provenance", "external")

    def predict_matrix(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=float).reshape(-1, self.mask.size)
        return np.clip(self.ensemble.predict_raw(X), 0.0, 1.0)

    def predict_many(self, features: Sequence[PairFeatures]) -> np.ndarray:
        if not features:
            return np.empty(0)
        return self.predict_matrix(feature_matrix(features, self.mask))

    def to_dict(self) -> dict:
        payload = _tree_payload(self)
        return {
            "format_version": MODEL_FORMAT_VERSION,
            **payload,
            "training_meta": self.training_meta,
            "checksum": _checksum(payload),
        }


def predict(model: SeparabilityModel, f: PairFeatures) -> float:
    return float(model.predict_many([f])[0])


def r2_score(y: np.ndarray, pred: np.ndarray) -> float:
    """Coefficient of determination; a zero-variance target scores 0 by convention."""
    y = np.asarray(y, dtype=float)
    ss_tot = float(((y - y.mean()) ** 2).sum())
    if ss_tot == 0.0:
        return 0.0
    ss_res = float(((y - pred) ** 2).sum())
    return 1.0 - ss_res / ss_tot


def _fit_ensemble(X: np.ndarray, y: np.ndarray, cfg: TrainConfig) -> Ensemble:
    n = len(y)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x7EE5]))
    base = float(y.mean())
    current = np.full(n, base)
    m = max(1, int(math.ceil(cfg.subsample * n)))
    trees = []
    for _ in range(cfg.n_trees):
        resid = y - current
        if m < n:
            idx = np.sort(rng.choice(n, size=m, replace=False))
            tree = fit_tree(X[idx], resid[idx], cfg.max_depth, cfg.min_leaf)
        else:
            tree = fit_tree(X, resid, cfg.max_depth, cfg.min_leaf)
        trees.append(tree)
        current = current + cfg.learning_rate * tree.predict(X)
    return Ensemble(trees, [cfg.learning_rate] * len(trees), base)


def _check_rows(data: TrainingSet):
    if len(data) < MIN_TRAINING_ROWS:
        raise TooFewRows(f"need at least {MIN_TRAINING_ROWS} rows, got {len(data)}")


def _folds(n: int, k: int, seed: int) -> list[np.ndarray]:
    perm = np.random.default_rng(np.random.SeedSequence([seed, 0xF01D])).permutation(n)
    return [np.sort(part) for part in np.array_split(perm, k)]


def cross_validate(data: TrainingSet, cfg: TrainConfig = TrainConfig(), mask: FeatureMask = DEFAULT_MASK) -> float:
    """Mean out-of-fold R^2 over `cfg.cv_folds` seeded, unstratified folds."""
    _check_rows(data)
    X, y = data.matrix(mask), data.labels
    scores = []
    for held in _folds(len(y), cfg.cv_folds, cfg.seed):
        train_idx = np.setdiff1d(np.arange(len(y)), held, assume_unique=True)
        ens = _fit_ensemble(X[train_idx], y[train_idx], cfg)
        pred = np.clip(ens.predict_raw(X[held]), 0.0, 1.0)
        scores.append(r2_score(y[held], pred))
    return float(np.mean(scores))


def train(
    data: TrainingSet,
    cfg: TrainConfig = TrainConfig(),
    mask: FeatureMask = DEFAULT_MASK,
    with_cv: bool = True,
) -> SeparabilityModel:
    _check_rows(data)
    ens = _fit_ensemble(data.matrix(mask), data.labels, cfg)
    meta = {
        "provenance": data.provenance,
        "cv_r2": cross_validate(data, cfg, mask) if with_cv else None,
        "seed": cfg.seed,
        "rows": len(data),
        "config": cfg.to_dict(),
    }
    return SeparabilityModel(ens, mask, meta)


def select_config(data: TrainingSet, base: TrainConfig = TrainConfig(), mask: FeatureMask = DEFAULT_MASK):
    """Pick (n_trees, max_depth) from CONFIG_GRID by CV R^2; returns (best config, {grid point: r2})."""
    scores = {}
    for n_trees, depth in CONFIG_GRID:
        scores[(n_trees, depth)] = cross_validate(data, replace(base, n_trees=n_trees, max_depth=depth), mask)
    best = max(CONFIG_GRID, key=lambda g: (scores[g], -g[0], -g[1]))
    return replace(base, n_trees=best[0], max_depth=best[1]), scores


@dataclass(frozen=True)
class AblationRow:
    removed: tuple[str, ...]
    r2: float
    change: float  # relative to the full-feature R^2, in percent


def ablate(data: TrainingSet, cfg: TrainConfig = TrainConfig()) -> list[AblationRow]:
    """CV R^2 with all six features, then with each feature and each feature pair removed."""
    _check_rows(data)
    full = cross_validate(data, cfg, FeatureMask.all())
    rows = [AblationRow((), full, 0.0)]
    removals = [(n,) for n in FEATURE_NAMES] + list(itertools.combinations(FEATURE_NAMES, 2))
    for removed in removals:
        r2 = cross_validate(data, cfg, FeatureMask.without(*removed))
        change = 100.0 * (r2 - full) / full if full != 0 else math.nan
        rows.append(AblationRow(tuple(removed), r2, change))
    return rows


def _canonical_order(c1: GaussianComponent, c2: GaussianComponent):
    key = lambda c: (c.center, c.major_sd, c.minor_sd, c.angle, c.soft_count)  # noqa: E731
    return (c2, c1) if key(c2) < key(c1) else (c1, c2)


def surrogate_separability(
    c1: GaussianComponent, c2: GaussianComponent, mc_samples: int = 2000, seed: int = 0
) -> float:
    """Synthetic separability label, 1 - 2 * (Monte-Carlo Bayes error) of the weighted pair.

    Not a model of perception; it only stands in for human labels so the
    training pipeline can run end to end.
    """
    if mc_samples < 100:
        raise PreconditionError("mc_samples must be >= 100")
    a, b = _canonical_order(c1, c2)
    total = a.soft_count + b.soft_count
    wa = a.soft_count / total if total > 0 else 0.5
    wb = 1.0 - wa
    rng = np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, 0x5E9A]))
    xa = a.sample(mc_samples, rng)
    xb = b.sample(mc_samples, rng)
    la, lb = math.log(wa) if wa > 0 else -math.inf, math.log(wb) if wb > 0 else -math.inf
    # ties go to the first component
    err_a = np.mean(la + a.logpdf(xa) < lb + b.logpdf(xa))
    err_b = np.mean(la + a.logpdf(xb) >= lb + b.logpdf(xb))
    eps = wa * err_a + wb * err_b
    return float(min(1.0, max(0.0, 1.0 - 2.0 * eps)))


def _tree_payload(model: SeparabilityModel) -> dict:
    return {
        "mask": dict(zip(FEATURE_NAMES, model.mask.flags())),
        "base_score": model.ensemble.base_score,
        "trees": [
            {"weight": float(w), "nodes": t.to_nodes()}
            for t, w in zip(model.ensemble.trees, model.ensemble.weights)
        ],
    }


def _checksum(payload: dict) -> str:
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def model_from_dict(doc: dict) -> SeparabilityModel:
    if not isinstance(doc, dict) or doc.get("format_version") != MODEL_FORMAT_VERSION:
        found = doc.get("format_version") if isinstance(doc, dict) else None
        raise FormatVersionMismatch(f"expected format_version {MODEL_FORMAT_VERSION}, found {found!r}")
    try:
        payload = {k: doc[k] for k in ("mask", "base_score", "trees")}
        stored = doc["checksum"]
    except KeyError as exc:
        raise FormatVersionMismatch(f"model file lacks field {exc}") from None
    if _checksum(payload) != stored:
        raise ChecksumMismatch("tree payload does not match its checksum")
    mask = FeatureMask(**{k: bool(payload["mask"][k]) for k in FEATURE_NAMES})
    trees = [Tree.from_nodes(t["nodes"]) for t in payload["trees"]]
    for t in trees:
        if t.feature.max(initial=-1) >= mask.size:
            raise FormatVersionMismatch("tree references a feature outside the mask")
    weights = [t["weight"] for t in payload["trees"]]
    return SeparabilityModel(Ensemble(trees, weights, payload["base_score"]), mask, doc.get("training_meta"))


def save_model(model: SeparabilityModel, path) -> None:
    Path(path).write_text(json.dumps(model.to_dict(), indent=1, sort_keys=True) + "\n")


def load_model(path) -> SeparabilityModel:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatVersionMismatch(f"unreadable model file {path}: {exc}") from None
    return model_from_dict(doc)
