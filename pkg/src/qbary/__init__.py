"""Barycenters of label-switched posterior samples in quotient spaces."""

from .barycenter import SgdConfig, StepSchedule, estimate_objective, sgd_gaussian_mixture, sgd_mean, sgd_quotient
from .bures import GaussianComponent, GaussianManifold
from .group import GroupElement, GroupSpec, align, apply, quotient_distance, solve_lap
from .manifold import Euclidean, ProductManifold
from .stream import SampleStream

__version__ = "0.1.0"

__all__ = [
    "Euclidean",
    "GaussianComponent",
    "GaussianManifold",
    "GroupElement",
    "GroupSpec",
    "ProductManifold",
    "SampleStream",
    "SgdConfig",
    "StepSchedule",
    "align",
    "apply",
    "estimate_objective",
    "quotient_distance",
    "sgd_gaussian_mixture",
    "sgd_mean",
    "sgd_quotient",
    "solve_lap",
]
