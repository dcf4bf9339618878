"""Pivotal reordering: relabel every draw by optimal assignment to one fixed draw."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .bures import GaussianComponent, sym
from .errors import ConfigError, ContractViolation
from .group import GroupSpec, align, apply, infer_factor
from .manifold import Manifold


class PivotKind(str, Enum):
    MAP_SAMPLE = "map"
    INDEX = "index"


@dataclass(frozen=True)
class PivotChoice:
    kind: PivotKind
    index: int | None = None
    log_density: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", PivotKind(self.kind))
        if self.kind is PivotKind.INDEX and self.index is None:
            raise ConfigError("index pivot requires an index", "pivot")
        if self.log_density is not None:
            object.__setattr__(self, "log_density", tuple(float(v) for v in self.log_density))

    @classmethod
    def map_sample(cls, log_density):
        return cls(PivotKind.MAP_SAMPLE, log_density=log_density)

    @classmethod
    def at(cls, index):
        return cls(PivotKind.INDEX, index=int(index))


def pivot_select(samples: Sequence, choice: PivotChoice) -> int:
    """Index of the pivot draw: the highest log density (first on ties) or a fixed index."""
    n = len(samples)
    if n == 0:
        raise ContractViolation("pivot_select needs at least one sample")
    if choice.kind is PivotKind.MAP_SAMPLE:
        if choice.log_density is None:
            raise ConfigError("MAP pivot requires per-sample log densities", "log_density")
        if len(choice.log_density) != n:
            raise ConfigError(f"{len(choice.log_density)} log densities for {n} samples", "log_density")
        return int(np.argmax(choice.log_density))
    if not 0 <= choice.index < n:
        raise ConfigError(f"pivot index {choice.index} out of range for {n} samples", "pivot")
    return choice.index


def boundary_index(samples: Sequence, factor: Manifold | None = None) -> int:
    """Draw whose two closest components are nearest each other (closest to a label collision)."""
    factor = factor or infer_factor(samples[0])
    best, best_gap = 0, np.inf
    for n, s in enumerate(samples):
        C = factor.pairwise_dist_sq(s, s)
        gap = C[~np.eye(len(C), dtype=bool)].min() if len(C) > 1 else np.inf
        if gap < best_gap:
            best, best_gap = n, gap
    return best


def naive_mean(samples: Sequence, factor: Manifold | None = None):
    """Factor-wise average; Gaussian covariances are averaged entrywise."""
    first = samples[0]
    if isinstance(first[0], GaussianComponent):
        K = len(first)
        out = []
        for i in range(K):
            mean = np.mean([s[i].mean for s in samples], axis=0)
            cov = sym(np.mean([s[i].covariance for s in samples], axis=0))
            out.append(GaussianComponent.from_covariance(mean, cov))
        return tuple(out)
    return np.mean(np.stack([np.asarray(s, dtype=float) for s in samples]), axis=0)


def pivot_relabel(samples: Sequence, pivot_index: int, G: GroupSpec, factor: Manifold | None = None):
    """Align every draw to ``samples[pivot_index]``; returns (relabeled draws, naive mean)."""
    if not 0 <= pivot_index < len(samples):
        raise ContractViolation(f"pivot index {pivot_index} out of range for {len(samples)} samples")
    pivot = samples[pivot_index]
    factor = factor or infer_factor(pivot)
    relabeled = [apply(align(pivot, s, G, factor).element, s) for s in samples]
    return relabeled, naive_mean(relabeled, factor)
