"""Cluster-ambiguity measurement for monochrome scatterplots.

A scatterplot is decomposed into Gaussian components, a learned regressor
predicts how separable each component pair looks, and the binary entropy of
those predictions is averaged into a score in [0, 1].
"""

__version__ = "0.1.0"

from .ambiguity import canonical_order, clams_score, entropy_ambiguity
from .core import (
    AmbiguityReport,
    Clustering,
    Decomposition,
    GaussianComponent,
    PairFeatures,
    PairScore,
    Scatterplot,
)
from .errors import ClamsError
from .features import DEFAULT_MASK, FeatureMask, pair_features
from .gmm import GmmFitConfig, decompose, fit_gmm, kneedle_elbow
from .separability import SeparabilityModel, TrainConfig, TrainingSet, load_model, save_model, train

__all__ = [
    "AmbiguityReport",
    "ClamsError",
    "Clustering",
    "DEFAULT_MASK",
    "Decomposition",
    "FeatureMask",
    "GaussianComponent",
    "GmmFitConfig",
    "PairFeatures",
    "PairScore",
    "Scatterplot",
    "SeparabilityModel",
    "TrainConfig",
    "TrainingSet",
    "canonical_order",
    "clams_score",
    "decompose",
    "entropy_ambiguity",
    "fit_gmm",
    "kneedle_elbow",
    "load_model",
    "pair_features",
    "save_model",
    "train",
]
