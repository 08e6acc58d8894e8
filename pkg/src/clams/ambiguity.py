"""Separability to local ambiguity (binary entropy) and the averaged plot-level score."""

from __future__ import annotations

import itertools

import numpy as np

from .core import AmbiguityReport, PairScore, Scatterplot
from .errors import OutOfRange
from .features import pair_features
from .gmm import GmmFitConfig, decompose
from .separability import SeparabilityModel


def entropy_ambiguity(s):
    """Base-2 binary entropy of a separability score (0 log 0 taken as 0).

    Accepts a scalar or an array; scalars come back as float.
    """
    arr = np.asarray(s, dtype=float)
    if np.any(~((arr >= 0.0) & (arr <= 1.0))):
        raise OutOfRange("separability must lie in [0, 1]")
    q = 1.0 - arr
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(arr > 0, -arr * np.log2(arr), 0.0) + np.where(q > 0, -q * np.log2(q), 0.0)
    a = np.clip(a, 0.0, 1.0)
    return float(a) if a.ndim == 0 else a


def canonical_order(points: np.ndarray) -> np.ndarray:
    """Permutation sorting points by x, then y, then original index."""
    return np.lexsort((np.arange(len(points)), points[:, 1], points[:, 0]))


def clams_score(
    plot: Scatterplot,
    model: SeparabilityModel,
    gmm_cfg: GmmFitConfig = GmmFitConfig(),
) -> AmbiguityReport:
    """Cluster-ambiguity score of a scatterplot: mean pairwise entropy of predicted separability."""
    ordered = Scatterplot(plot.points[canonical_order(plot.points)], plot.id)
    dec = decompose(ordered, gmm_cfg)
    pairs = list(itertools.combinations(range(dec.k_opt), 2))
    feats = [pair_features(dec.components[i], dec.components[j], (i, j)) for i, j in pairs]
    sep = model.predict_many(feats)
    amb = entropy_ambiguity(sep) if len(sep) else np.empty(0)
    records = tuple(PairScore(p, float(s), float(a)) for p, s, a in zip(pairs, sep, amb))
    score = float(np.mean(amb)) if len(records) else 0.0
    meta = {
        "id": plot.id,
        "n_points": plot.n,
        "model_provenance": model.provenance,
        "gmm_config": gmm_cfg.to_dict(),
    }
    return AmbiguityReport(min(max(score, 0.0), 1.0), records, dec, meta)
