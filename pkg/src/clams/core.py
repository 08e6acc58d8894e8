"""Shared domain types: scatterplots, Gaussian components, decompositions, reports."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import EmptyInput, NonFinite, PreconditionError

WEIGHT_SUM_TOL = 1e-9


def _frozen_array(values, dtype=float) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True)
    arr.setflags(write=False)
    return arr


def canonical_angle(theta: float) -> float:
    """Fold an axis angle into [0, pi); a principal axis has no direction."""
    t = math.fmod(float(theta), math.pi)
    if t < 0.0:
        t += math.pi
    if t >= math.pi:
        t = 0.0
    return t


@dataclass(frozen=True)
class Scatterplot:
    """Validated, immutable set of 2-D points. Row order is the point identity."""

    points: np.ndarray
    id: str = ""

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.size == 0:
            raise EmptyInput("a scatterplot needs at least 2 points")
        if pts.ndim != 2 or pts.shape[1] != 2:
            raise PreconditionError(f"points must have shape (N, 2), got {pts.shape}")
        if pts.shape[0] < 2:
            raise EmptyInput("a scatterplot needs at least 2 points")
        if not np.all(np.isfinite(pts)):
            bad = int(np.flatnonzero(~np.isfinite(pts).all(axis=1))[0])
            raise NonFinite(f"point {bad} has a non-finite coordinate")
        object.__setattr__(self, "points", _frozen_array(pts))
        object.__setattr__(self, "id", str(self.id))

    def __len__(self):
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[0]


def validate_scatterplot(points, id: str = "") -> Scatterplot:
    return Scatterplot(points, id)


@dataclass(frozen=True)
class GaussianComponent:
    """Summary of one fitted 2-D Gaussian: center, axis spreads, orientation, mass."""

    center: tuple[float, float]
    major_sd: float
    minor_sd: float
    angle: float
    soft_count: float
    weight: float = 1.0

    def __post_init__(self):
        cx, cy = (float(v) for v in self.center)
        object.__setattr__(self, "center", (cx, cy))
        vals = (cx, cy, self.major_sd, self.minor_sd, self.angle, self.soft_count, self.weight)
        if not all(math.isfinite(float(v)) for v in vals):
            raise NonFinite("component parameters must be finite")
        if self.minor_sd < 0 or self.major_sd <= 0:
            raise PreconditionError("standard deviations must be positive")
        if self.major_sd < self.minor_sd:
            raise PreconditionError("major_sd must be >= minor_sd")
        if self.soft_count < 0:
            raise PreconditionError("soft_count must be >= 0")
        if not 0.0 < self.weight <= 1.0 + WEIGHT_SUM_TOL:
            raise PreconditionError("weight must lie in (0, 1]")
        for name in ("major_sd", "minor_sd", "soft_count", "weight"):
            object.__setattr__(self, name, float(getattr(self, name)))
        object.__setattr__(self, "angle", canonical_angle(self.angle))

    @classmethod
    def from_axes(cls, center, sd1, sd2, angle, soft_count, weight=1.0):
        """Build from two axis spreads in any order; swaps so the major axis comes first."""
        if sd2 > sd1:
            sd1, sd2 = sd2, sd1
            angle = angle + math.pi / 2
        return cls(tuple(center), sd1, sd2, angle, soft_count, weight)

    @classmethod
    def from_covariance(cls, mean, cov, soft_count, weight=1.0):
        cov = np.asarray(cov, dtype=float)
        major_var, minor_var, angle = covariance_axes(cov[0, 0], cov[0, 1], cov[1, 1])
        return cls(
            (float(mean[0]), float(mean[1])),
            math.sqrt(major_var),
            math.sqrt(max(minor_var, 0.0)),
            angle,
            soft_count,
            weight,
        )

    def covariance(self) -> np.ndarray:
        c, s = math.cos(self.angle), math.sin(self.angle)
        rot = np.array([[c, -s], [s, c]])
        return rot @ np.diag([self.major_sd**2, self.minor_sd**2]) @ rot.T

    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        z = rng.standard_normal((n, 2)) * np.array([self.major_sd, self.minor_sd])
        c, s = math.cos(self.angle), math.sin(self.angle)
        return z @ np.array([[c, s], [-s, c]]) + np.array(self.center)

    def logpdf(self, pts: np.ndarray) -> np.ndarray:
        """Log density at each row of `pts`, evaluated in the component's axis frame."""
        c, s = math.cos(self.angle), math.sin(self.angle)
        d = np.asarray(pts, dtype=float) - np.array(self.center)
        u = (d[:, 0] * c + d[:, 1] * s) / self.major_sd
        v = (-d[:, 0] * s + d[:, 1] * c) / self.minor_sd
        return -0.5 * (u * u + v * v) - math.log(2.0 * math.pi * self.major_sd * self.minor_sd)

    def to_dict(self) -> dict:
        return {
            "center": list(self.center),
            "major_sd": self.major_sd,
            "minor_sd": self.minor_sd,
            "angle": self.angle,
            "soft_count": self.soft_count,
            "weight": self.weight,
        }


def covariance_axes(cxx: float, cxy: float, cyy: float) -> tuple[float, float, float]:
    """Closed-form eigen-decomposition of a symmetric 2x2 matrix.

    Returns (larger eigenvalue, smaller eigenvalue, angle of the leading
    eigenvector folded into [0, pi)). Isotropic matrices report angle 0.
    """
    half_trace = 0.5 * (cxx + cyy)
    half_diff = 0.5 * (cxx - cyy)
    r = math.hypot(half_diff, cxy)
    angle = 0.5 * math.atan2(2.0 * cxy, cxx - cyy) if r > 0 else 0.0
    return half_trace + r, half_trace - r, canonical_angle(angle)


@dataclass(frozen=True)
class Decomposition:
    components: tuple[GaussianComponent, ...]
    k_opt: int
    bic_curve: tuple[tuple[int, float], ...]
    log_likelihood: float

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "bic_curve", tuple((int(k), float(b)) for k, b in self.bic_curve))
        if self.k_opt < 1 or self.k_opt != len(self.components):
            raise PreconditionError("k_opt must equal the number of components")
        ks = [k for k, _ in self.bic_curve]
        if ks and ks != list(range(1, len(ks) + 1)):
            raise PreconditionError("bic_curve must cover k = 1..K_max contiguously")
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise PreconditionError(f"component weights sum to {total}, expected 1")

    def to_dict(self) -> dict:
        return {
            "k_opt": self.k_opt,
            "log_likelihood": self.log_likelihood,
            "components": [c.to_dict() for c in self.components],
            "bic_curve": [[k, b] for k, b in self.bic_curve],
        }


FEATURE_NAMES = ("dc", "dsr", "dd", "sd", "ed", "ac")


@dataclass(frozen=True)
class PairFeatures:
    dc: float
    dsr: float
    dd: float
    sd: float
    ed: float
    ac: float
    pair: tuple[int, int] = (0, 1)

    def values(self) -> tuple[float, ...]:
        return tuple(getattr(self, name) for name in FEATURE_NAMES)


@dataclass(frozen=True)
class PairScore:
    pair: tuple[int, int]
    separability: float
    ambiguity: float


@dataclass(frozen=True)
class AmbiguityReport:
    score: float
    pairs: tuple[PairScore, ...]
    decomposition: Decomposition
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))
        if not 0.0 <= self.score <= 1.0:
            raise PreconditionError("score must lie in [0, 1]")

    def to_dict(self) -> dict:
        return {
            "score": self.score,
            "pairs": [
                {"pair": list(p.pair), "separability": p.separability, "ambiguity": p.ambiguity}
                for p in self.pairs
            ],
            "decomposition": self.decomposition.to_dict(),
            **self.meta,
        }


@dataclass(frozen=True)
class Clustering:
    """Per-point labels aligned with a scatterplot; -1 marks an unassigned point."""

    labels: np.ndarray

    def __post_init__(self):
        labels = np.asarray(self.labels)
        if labels.ndim != 1:
            raise PreconditionError("labels must be one-dimensional")
        if labels.size and not np.issubdtype(labels.dtype, np.integer):
            if not np.all(labels == np.round(labels)):
                raise PreconditionError("labels must be integers")
        labels = labels.astype(np.int64)
        if labels.size and labels.min() < -1:
            raise PreconditionError("labels must be >= -1")
        object.__setattr__(self, "labels", _frozen_array(labels, dtype=np.int64))

    def __len__(self):
        return self.labels.shape[0]

    def matches(self, plot: Scatterplot) -> bool:
        return len(self) == plot.n


def as_labels(c: Clustering | Sequence[int] | np.ndarray) -> np.ndarray:
    if isinstance(c, Clustering):
        return c.labels
    return Clustering(np.asarray(c)).labels
