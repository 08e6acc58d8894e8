"""Pairwise features of two Gaussian components that drive perceived separability."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import FEATURE_NAMES, GaussianComponent, PairFeatures
from .errors import DegenerateComponent, PreconditionError


@dataclass(frozen=True)
class FeatureMask:
    dc: bool = True
    dsr: bool = True
    dd: bool = False
    sd: bool = True
    ed: bool = True
    ac: bool = True

    def __post_init__(self):
        if not any(self.flags()):
            raise PreconditionError("a feature mask needs at least one enabled feature")

    def flags(self) -> tuple[bool, ...]:
        return tuple(bool(getattr(self, name)) for name in FEATURE_NAMES)

    def names(self) -> tuple[str, ...]:
        return tuple(name for name in FEATURE_NAMES if getattr(self, name))

    @property
    def size(self) -> int:
        return sum(self.flags())

    @classmethod
    def all(cls) -> "FeatureMask":
        return cls(True, True, True, True, True, True)

    @classmethod
    def from_flags(cls, flags) -> "FeatureMask":
        return cls(*(bool(f) for f in flags))

    @classmethod
    def without(cls, *names: str, base: "FeatureMask | None" = None) -> "FeatureMask":
        base = base or cls.all()
        unknown = set(names) - set(FEATURE_NAMES)
        if unknown:
            raise PreconditionError(f"unknown feature(s): {sorted(unknown)}")
        return cls(**{n: getattr(base, n) and n not in names for n in FEATURE_NAMES})


DEFAULT_MASK = FeatureMask()


def size_of(c: GaussianComponent) -> float:
    """Root sum square of the two axis standard deviations."""
    return math.hypot(c.major_sd, c.minor_sd)


def _density(c: GaussianComponent) -> float:
    return c.soft_count / (2.0 * c.major_sd * c.minor_sd)


def pair_features(c1: GaussianComponent, c2: GaussianComponent, pair=(0, 1)) -> PairFeatures:
    if c1.minor_sd == 0 or c2.minor_sd == 0:
        raise DegenerateComponent("minor_sd of 0 leaves density and ellipticity undefined")
    # every feature is built from symmetric operations so (c1, c2) and (c2, c1) agree bit for bit
    dc = math.hypot(c1.center[0] - c2.center[0], c1.center[1] - c2.center[1])
    s1, s2 = size_of(c1), size_of(c2)
    dsr = dc / (s1 + s2)
    dd = abs(_density(c1) - _density(c2))
    sd = abs(s1 - s2)
    ed = abs(c1.major_sd / c1.minor_sd - c2.major_sd / c2.minor_sd)
    delta = abs(c1.angle - c2.angle)
    ac = min(delta, 2.0 * math.pi - delta)
    return PairFeatures(dc, dsr, dd, sd, ed, ac, tuple(pair))


def feature_vector(f: PairFeatures, mask: FeatureMask = DEFAULT_MASK) -> np.ndarray:
    return np.array([v for v, on in zip(f.values(), mask.flags()) if on], dtype=float)


def feature_matrix(rows, mask: FeatureMask = DEFAULT_MASK) -> np.ndarray:
    """Stack many PairFeatures into an (n, mask.size) design matrix."""
    full = np.array([f.values() for f in rows], dtype=float).reshape(-1, len(FEATURE_NAMES))
    return full[:, np.array(mask.flags())]
