"""Synthetic stimuli: Gaussian pairs for training, multi-blob scenes for evaluation.

Also reads externally supplied ClustMe-style exports and the training CSV format.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import FEATURE_NAMES, Clustering, GaussianComponent, PairFeatures, Scatterplot
from .errors import ParseError, PreconditionError, RangeError
from .features import pair_features
from .gmm import GmmFitConfig, fit_gmm
from .separability import TrainingSet, surrogate_separability

CLUSTME_PARAMS_HEADER = ["id", "mx1", "my1", "a1", "b1", "theta1", "n1", "mx2", "my2", "a2", "b2", "theta2", "n2"]
CLUSTME_SCORES_HEADER = ["id", "separability"]
TRAINING_HEADER = [*FEATURE_NAMES, "label"]


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from any mix of ints and strings."""
    ints = []
    for p in parts:
        if isinstance(p, str):
            ints.extend(p.encode("utf-8"))
            ints.append(0x100)
        else:
            ints.append(int(p) & 0xFFFFFFFFFFFFFFFF)
    return int(np.random.SeedSequence(ints).generate_state(1, dtype=np.uint64)[0] >> 1)


@dataclass(frozen=True)
class PairSpec:
    """Two generating Gaussians; each component's `soft_count` is its exact point count."""

    first: GaussianComponent
    second: GaussianComponent

    def __post_init__(self):
        for c in (self.first, self.second):
            if c.soft_count < 10 or not float(c.soft_count).is_integer():
                raise PreconditionError("each component needs an integer count >= 10")

    @property
    def total(self) -> int:
        return int(self.first.soft_count + self.second.soft_count)


def sample_pair(spec: PairSpec, seed: int = 0) -> Scatterplot:
    rng = np.random.default_rng(derive_seed(seed, "pair"))
    pts = np.vstack([
        spec.first.sample(int(spec.first.soft_count), rng),
        spec.second.sample(int(spec.second.soft_count), rng),
    ])
    return Scatterplot(pts, id=f"pair-{seed}")


@dataclass(frozen=True)
class PairRanges:
    """Uniform sampling ranges for synthetic training pairs."""

    distance: tuple[float, float] = (0.0, 5.0)
    major_sd: tuple[float, float] = (0.3, 2.0)
    ellipticity: tuple[float, float] = (0.2, 1.0)  # minor / major
    count: tuple[int, int] = (50, 500)

    def __post_init__(self):
        for name in ("distance", "major_sd", "ellipticity", "count"):
            lo, hi = getattr(self, name)
            if hi < lo or lo < 0:
                raise PreconditionError(f"range {name} must be non-empty and non-negative")
        if self.major_sd[0] <= 0 or self.ellipticity[0] <= 0 or self.ellipticity[1] > 1:
            raise PreconditionError("sd and ellipticity ranges must be positive, ellipticity <= 1")
        if self.count[0] < 10:
            raise PreconditionError("counts must be >= 10")


def random_pair(ranges: PairRanges, rng: np.random.Generator) -> PairSpec:
    comps = []
    direction = rng.uniform(0.0, 2.0 * math.pi)
    dist = rng.uniform(*ranges.distance)
    for j in range(2):
        a = rng.uniform(*ranges.major_sd)
        b = a * rng.uniform(*ranges.ellipticity)
        theta = rng.uniform(0.0, math.pi)
        n = int(rng.integers(ranges.count[0], ranges.count[1] + 1))
        center = (0.0, 0.0) if j == 0 else (dist * math.cos(direction), dist * math.sin(direction))
        comps.append(GaussianComponent(center, a, b, theta, float(n), 0.5))
    return PairSpec(*comps)


def pair_label_seed(seed: int, index: int) -> int:
    return derive_seed(seed, index, "label")


def generate_training_set(
    n_pairs: int,
    ranges: PairRanges = PairRanges(),
    mc_samples: int = 2000,
    seed: int = 0,
    refit: bool = False,
) -> TrainingSet:
    """Surrogate-labelled training rows.

    Features come from the generating parameters unless `refit` is set, in
    which case each pair is sampled and re-decomposed with a 2-component fit.
    """
    if n_pairs < 20:
        raise PreconditionError("n_pairs must be >= 20")
    rng = np.random.default_rng(derive_seed(seed, "pairs"))
    specs = [random_pair(ranges, rng) for _ in range(n_pairs)]
    rows = []
    for i, spec in enumerate(specs):
        label = surrogate_separability(spec.first, spec.second, mc_samples, pair_label_seed(seed, i))
        if refit:
            comps, _ = fit_gmm(sample_pair(spec, derive_seed(seed, i)), 2, GmmFitConfig(seed=seed))
            feats = pair_features(comps[0], comps[1])
        else:
            feats = pair_features(spec.first, spec.second)
        rows.append((feats, label))
    return TrainingSet(tuple(rows), "synthetic-surrogate", tuple(specs))


@dataclass(frozen=True)
class SceneSpec:
    """Random k-blob scene; `centers`, when given, overrides the center box."""

    k: int = 3
    center_box: tuple[tuple[float, float], tuple[float, float]] = ((0.0, 20.0), (0.0, 20.0))
    sd_range: tuple[float, float] = (0.5, 2.0)
    ellipticity_range: tuple[float, float] = (0.3, 1.0)
    count_range: tuple[int, int] = (100, 300)
    seed: int = 0
    centers: tuple[tuple[float, float], ...] | None = None

    def __post_init__(self):
        if self.k < 1:
            raise PreconditionError("k must be >= 1")
        if self.centers is not None and len(self.centers) != self.k:
            raise PreconditionError("explicit centers must number k")
        (x0, x1), (y0, y1) = self.center_box
        if x1 < x0 or y1 < y0:
            raise PreconditionError("center box must be non-empty")
        lo, hi = self.sd_range
        if not 0 < lo <= hi:
            raise PreconditionError("sd_range must be positive and non-empty")
        lo, hi = self.ellipticity_range
        if not 0 < lo <= hi <= 1:
            raise PreconditionError("ellipticity_range must lie in (0, 1]")
        lo, hi = self.count_range
        if not 1 <= lo <= hi:
            raise PreconditionError("count_range must be positive and non-empty")


def blob_scene(centers: Sequence[tuple[float, float]], sd: float = 1.0, count: int = 250, seed: int = 0) -> SceneSpec:
    """Isotropic equal-size blobs at fixed centers."""
    return SceneSpec(
        k=len(centers),
        sd_range=(sd, sd),
        ellipticity_range=(1.0, 1.0),
        count_range=(count, count),
        seed=seed,
        centers=tuple(tuple(map(float, c)) for c in centers),
    )


def scene_components(spec: SceneSpec) -> list[GaussianComponent]:
    rng = np.random.default_rng(derive_seed(spec.seed, "scene-params"))
    comps = []
    for j in range(spec.k):
        if spec.centers is not None:
            center = spec.centers[j]
        else:
            (x0, x1), (y0, y1) = spec.center_box
            center = (rng.uniform(x0, x1), rng.uniform(y0, y1))
        a = rng.uniform(*spec.sd_range)
        b = a * rng.uniform(*spec.ellipticity_range)
        theta = rng.uniform(0.0, math.pi)
        n = int(rng.integers(spec.count_range[0], spec.count_range[1] + 1))
        comps.append(GaussianComponent(center, a, b, theta, float(n), 1.0))
    return comps


def generate_scene(spec: SceneSpec) -> tuple[Scatterplot, Clustering]:
    comps = scene_components(spec)
    rng = np.random.default_rng(derive_seed(spec.seed, "scene-points"))
    parts, labels = [], []
    for j, c in enumerate(comps):
        n = int(c.soft_count)
        parts.append(c.sample(n, rng))
        labels.append(np.full(n, j))
    return Scatterplot(np.vstack(parts), id=f"scene-{spec.seed}"), Clustering(np.concatenate(labels))


def _read_csv(path, header: list[str]):
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            found = next(reader)
        except StopIteration:
            raise ParseError("empty file", path, 1) from None
        if [h.strip() for h in found] != header:
            raise ParseError(f"expected header {','.join(header)}, got {','.join(found)}", path, 1)
        for row in reader:
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise ParseError(f"expected {len(header)} fields, got {len(row)}", path, reader.line_num)
            yield reader.line_num, row


def _float(value: str, path, line) -> float:
    try:
        v = float(value)
    except ValueError:
        raise ParseError(f"not a number: {value!r}", path, line) from None
    if not math.isfinite(v):
        raise ParseError(f"non-finite value: {value!r}", path, line)
    return v


def ingest_clustme(params_csv, scores_csv) -> TrainingSet:
    """Build a human-labelled TrainingSet from a parameters CSV and a scores CSV joined on id."""
    scores = {}
    for line, row in _read_csv(scores_csv, CLUSTME_SCORES_HEADER):
        s = _float(row[1], scores_csv, line)
        if not 0.0 <= s <= 1.0:
            raise RangeError(f"separability {s} outside [0, 1]", scores_csv, line)
        scores[row[0].strip()] = s
    rows = []
    for line, row in _read_csv(params_csv, CLUSTME_PARAMS_HEADER):
        key = row[0].strip()
        v = [_float(x, params_csv, line) for x in row[1:]]
        if key not in scores:
            raise ParseError(f"id {key!r} has no separability score", params_csv, line)
        try:
            c1 = GaussianComponent.from_axes((v[0], v[1]), v[2], v[3], v[4], v[5], 0.5)
            c2 = GaussianComponent.from_axes((v[6], v[7]), v[8], v[9], v[10], v[11], 0.5)
            feats = pair_features(c1, c2)
        except Exception as exc:
            raise ParseError(f"invalid component parameters: {exc}", params_csv, line) from None
        rows.append((feats, scores[key]))
    return TrainingSet(tuple(rows), "clustme")


def write_training_csv(data: TrainingSet, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(TRAINING_HEADER)
        for f, s in data.rows:
            w.writerow([repr(v) for v in f.values()] + [repr(s)])


def read_training_csv(path, provenance: str = "external") -> TrainingSet:
    rows = []
    for line, row in _read_csv(path, TRAINING_HEADER):
        v = [_float(x, path, line) for x in row]
        if not 0.0 <= v[-1] <= 1.0:
            raise RangeError(f"label {v[-1]} outside [0, 1]", path, line)
        rows.append((PairFeatures(*v[:6]), v[-1]))
    return TrainingSet(tuple(rows), provenance)


def highdim_mixture(n_points: int, dim: int, k: int = 4, separation: float = 4.0, seed: int = 0) -> np.ndarray:
    """Isotropic unit-variance Gaussian mixture in `dim` dimensions with random centers.

    Centers are drawn from N(0, separation^2 I); cluster sizes are a random
    split of `n_points` with every cluster non-empty.
    """
    if dim < 2 or k < 1 or n_points < k:
        raise PreconditionError("need dim >= 2, k >= 1 and n_points >= k")
    rng = np.random.default_rng(derive_seed(seed, "highdim"))
    centers = rng.normal(0.0, separation, (k, dim))
    sizes = rng.multinomial(n_points - k, np.full(k, 1.0 / k)) + 1
    return np.vstack([rng.normal(c, 1.0, (m, dim)) for c, m in zip(centers, sizes)])
