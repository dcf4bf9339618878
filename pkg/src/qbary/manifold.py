"""Riemannian manifold contract with Euclidean and product instances.

Every manifold exposes ``dist``/``dist_sq``, ``exp`` and ``log``. Points are
plain numpy arrays for Euclidean space; product points are sequences of factor
points (a ``(K, d)`` array when the factor is Euclidean).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import ContractViolation


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by the library and its tests."""

    roundtrip: float = 1e-10
    identity: float = 1e-12
    eigen_floor: float = 1e-12
    symmetry: float = 1e-10


TOL = Tolerances()


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A tangent vector together with the point it is attached to.

    ``components`` is an array for Euclidean/Bures manifolds, a ``(mean, cov)``
    tuple for Gaussian components, and a list of factor tangent vectors for
    product manifolds. Multiplying by a scalar rescales the components.
    """

    base_point: Any
    components: Any

    def __mul__(self, scalar):
        return TangentVector(self.base_point, _scale(self.components, scalar))

    __rmul__ = __mul__


def _scale(components, scalar):
    if isinstance(components, list):
        return [c * scalar for c in components]
    if isinstance(components, tuple):
        return tuple(c * scalar for c in components)
    return components * scalar


class Manifold:
    """Base class; subclasses implement ``dist_sq``, ``exp``, ``log``, ``norm``."""

    def check_point(self, p):
        return p

    def same_point(self, p, q) -> bool:
        return p is q or bool(np.array_equal(np.asarray(p), np.asarray(q)))

    def dist_sq(self, p, q) -> float:
        raise NotImplementedError

    def dist(self, p, q) -> float:
        return math.sqrt(self.dist_sq(p, q))

    def exp(self, p, v):
        raise NotImplementedError

    def log(self, p, q) -> TangentVector:
        raise NotImplementedError

    def norm(self, v) -> float:
        raise NotImplementedError

    def geodesic_step(self, p, q, eta: float):
        """Move ``p`` a fraction ``eta`` of the way to ``q``: ``exp_p(eta log_p q)``."""
        return self.exp(p, self.log(p, q) * eta)

    def pairwise_dist_sq(self, ps: Sequence, qs: Sequence) -> np.ndarray:
        """Matrix ``C[i, j] = dist(ps[i], qs[j])**2``."""
        out = np.empty((len(ps), len(qs)))
        for i, p in enumerate(ps):
            for j, q in enumerate(qs):
                out[i, j] = self.dist_sq(p, q)
        return out

    def stack(self, points: Sequence):
        return tuple(points)

    def _components(self, p, v):
        if not isinstance(v, TangentVector):
            return v
        if not self.same_point(v.base_point, p):
            raise ContractViolation("tangent vector is not based at the given point")
        return v.components


class Euclidean(Manifold):
    """Flat space R^dim; exp is addition and log is subtraction."""

    def __init__(self, dim: int):
        if dim < 1:
            raise ContractViolation(f"dimension must be positive, got {dim}")
        self.dim = int(dim)

    def __repr__(self):
        return f"Euclidean({self.dim})"

    def check_point(self, p):
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            raise ContractViolation(f"expected a point of shape ({self.dim},), got {p.shape}")
        if not np.all(np.isfinite(p)):
            raise ContractViolation("point has non-finite coordinates")
        return p

    def dist_sq(self, p, q):
        diff = self.check_point(p) - self.check_point(q)
        return float(diff @ diff)

    def exp(self, p, v):
        p = self.check_point(p)
        comp = np.asarray(self._components(p, v), dtype=float)
        if comp.shape != p.shape:
            raise ContractViolation(f"tangent shape {comp.shape} does not match point {p.shape}")
        return p + comp

    def log(self, p, q):
        p = self.check_point(p)
        return TangentVector(p, self.check_point(q) - p)

    def norm(self, v):
        comp = v.components if isinstance(v, TangentVector) else v
        return float(np.linalg.norm(comp))

    def geodesic_step(self, p, q, eta):
        return p + eta * (q - p)

    def pairwise_dist_sq(self, ps, qs):
        ps = np.asarray(ps, dtype=float).reshape(len(ps), self.dim)
        qs = np.asarray(qs, dtype=float).reshape(len(qs), self.dim)
        diff = ps[:, None, :] - qs[None, :, :]
        return np.einsum("ijk,ijk->ij", diff, diff)

    def stack(self, points):
        return np.stack([np.asarray(x, dtype=float) for x in points])


class ProductManifold(Manifold):
    """The K-fold product ``factor^K`` with the product (l2) metric.

    Set ``validate=True`` to check pairwise distinctness of factors (the
    configuration-space condition) on every ``exp``/``log`` call.
    """

    def __init__(self, factor: Manifold, K: int, validate: bool = False):
        if K < 1:
            raise ContractViolation(f"K must be >= 1, got {K}")
        self.factor = factor
        self.K = int(K)
        self.validate = validate

    def __repr__(self):
        return f"ProductManifold({self.factor!r}, K={self.K})"

    def check_point(self, p):
        if len(p) != self.K:
            raise ContractViolation(f"expected {self.K} factors, got {len(p)}")
        return p

    def same_point(self, p, q):
        if p is q:
            return True
        return len(p) == len(q) and all(self.factor.same_point(a, b) for a, b in zip(p, q))

    def dist_sq(self, p, q):
        self.check_point(p)
        self.check_point(q)
        return sum(self.factor.dist_sq(a, b) for a, b in zip(p, q))

    def exp(self, p, v):
        self.check_point(p)
        comps = self._components(p, v)
        if len(comps) != self.K:
            raise ContractViolation(f"tangent has {len(comps)} factors, expected {self.K}")
        out = self.stack([self.factor.exp(a, w) for a, w in zip(p, comps)])
        if self.validate:
            check_configuration(out, self.factor)
        return out

    def log(self, p, q):
        self.check_point(p)
        self.check_point(q)
        if self.validate:
            check_configuration(p, self.factor)
            check_configuration(q, self.factor)
        return TangentVector(p, [self.factor.log(a, b) for a, b in zip(p, q)])

    def norm(self, v):
        comps = v.components if isinstance(v, TangentVector) else v
        return math.sqrt(sum(self.factor.norm(w) ** 2 for w in comps))

    def geodesic_step(self, p, q, eta):
        if isinstance(self.factor, Euclidean) and isinstance(p, np.ndarray):
            return p + eta * (np.asarray(q) - p)
        return self.stack([self.factor.geodesic_step(a, b, eta) for a, b in zip(p, q)])

    def stack(self, points):
        return self.factor.stack(points)


def check_configuration(p: Sequence, factor: Manifold, tol: float = 0.0):
    """Raise unless the factors of ``p`` are pairwise more than ``tol`` apart."""
    n = len(p)
    for i in range(n):
        for j in range(i + 1, n):
            if factor.dist(p[i], p[j]) <= tol:
                raise ContractViolation(f"factors {i} and {j} coincide; point is off the configuration space")
    return p
