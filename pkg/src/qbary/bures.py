"""Bures-Wasserstein geometry of Gaussian parameters.

SPD matrix functions go through a symmetric eigendecomposition with the
eigenvalues clamped at ``TOL.eigen_floor``. The Gaussian W2 distance splits
into a Euclidean mean term and the squared Bures distance between covariances.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, SingularMatrixError, StepTooLargeError
from .manifold import TOL, Manifold, TangentVector

log = logging.getLogger(__name__)


def _as_matrix(A, name="matrix"):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ContractViolation(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ContractViolation(f"{name} has non-finite entries")
    return A


def _check_symmetric(A, name="matrix"):
    A = _as_matrix(A, name)
    scale = np.linalg.norm(A)
    if scale > 0 and np.linalg.norm(A - A.T) / scale > TOL.symmetry:
        raise ContractViolation(f"{name} is not symmetric")
    return 0.5 * (A + A.T)


def sym(A):
    return 0.5 * (A + A.T)


def _eigh(S, name="matrix"):
    w, V = np.linalg.eigh(_check_symmetric(S, name))
    return np.maximum(w, TOL.eigen_floor), V


def spd_sqrt(S):
    """Principal square root of a symmetric positive definite matrix."""
    w, V = _eigh(S)
    return (V * np.sqrt(w)) @ V.T


def spd_inv_sqrt(S):
    w, V = _eigh(S)
    return (V / np.sqrt(w)) @ V.T


def clamp_spd(S):
    """Symmetrize ``S`` and lift any eigenvalue below the floor up to it."""
    S = sym(_as_matrix(S))
    w, V = np.linalg.eigh(S)
    if w.min() >= TOL.eigen_floor:
        return S
    log.warning("clamping covariance eigenvalue %.3e to %.1e", w.min(), TOL.eigen_floor)
    return sym((V * np.maximum(w, TOL.eigen_floor)) @ V.T)


def bures_distance_sq(S1, S2) -> float:
    """Squared Bures distance ``tr(S1 + S2 - 2 (S1^1/2 S2 S1^1/2)^1/2)``."""
    S1 = _check_symmetric(S1, "S1")
    S2 = _check_symmetric(S2, "S2")
    if S1.shape != S2.shape:
        raise ContractViolation(f"shape mismatch {S1.shape} vs {S2.shape}")
    if np.array_equal(S1, S2):
        return 0.0  # exact, rather than trace cancellation noise
    r = spd_sqrt(S1)
    cross = np.linalg.eigvalsh(sym(r @ S2 @ r))
    value = np.trace(S1) + np.trace(S2) - 2.0 * np.sqrt(np.maximum(cross, 0.0)).sum()
    return max(float(value), 0.0)


def transport_map(S1, S2):
    """Symmetric matrix T pushing N(0, S1) onto N(0, S2), so that ``T S1 T = S2``."""
    S1 = _check_symmetric(S1, "S1")
    S2 = _check_symmetric(S2, "S2")
    if S1.shape != S2.shape:
        raise ContractViolation(f"shape mismatch {S1.shape} vs {S2.shape}")
    w, V = np.linalg.eigh(S1)
    if w.min() < TOL.eigen_floor:
        raise SingularMatrixError(
            f"source covariance has eigenvalue {w.min():.3e} below {TOL.eigen_floor:.0e}", float(w.min())
        )
    root = (V * np.sqrt(w)) @ V.T
    inv_root = (V / np.sqrt(w)) @ V.T
    middle = spd_sqrt(sym(root @ S2 @ root))
    return sym(inv_root @ middle @ inv_root)


def lyapunov_solve(S, xi):
    """Solve ``L S + S L = xi`` for symmetric L, working in the eigenbasis of S."""
    S = _check_symmetric(S, "S")
    xi = _check_symmetric(xi, "xi")
    w, V = np.linalg.eigh(S)
    rotated = V.T @ xi @ V
    return sym(V @ (rotated / (w[:, None] + w[None, :])) @ V.T)


def bures_exp(S, xi):
    """Exponential map ``(I + L) S (I + L)`` with ``L`` the Lyapunov solution for ``xi``."""
    S = _check_symmetric(S, "S")
    A = np.eye(len(S)) + lyapunov_solve(S, xi)
    if np.abs(np.linalg.eigvalsh(A)).min() < 1e-12:
        raise StepTooLargeError("I + L is singular; shrink the step")
    return clamp_spd(A @ S @ A)


def bures_log(S1, S2):
    """Logarithm map: the tangent ``T S1 + S1 T - 2 S1`` at S1 pointing to S2."""
    S1 = _check_symmetric(S1, "S1")
    T = transport_map(S1, S2)
    return sym(T @ S1 + S1 @ T - 2.0 * S1)


def bures_norm(S, xi) -> float:
    """Length of tangent ``xi`` at ``S`` under the Bures metric, ``sqrt(tr(L S L))``."""
    L = lyapunov_solve(S, xi)
    return math.sqrt(max(float(np.trace(L @ S @ L)), 0.0))


@dataclass(frozen=True, eq=False)
class GaussianComponent:
    """Mean, covariance and a square factor with ``covariance = factor @ factor.T``.

    The factor is not required to be lower triangular; gradient steps on it
    break triangularity. ``cholesky()`` returns the canonical factor.
    """

    mean: np.ndarray
    covariance: np.ndarray
    factor: np.ndarray

    @classmethod
    def from_covariance(cls, mean, covariance):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        cov = _check_symmetric(covariance, "covariance")
        if cov.shape != (len(mean), len(mean)):
            raise ContractViolation(f"covariance shape {cov.shape} does not match mean length {len(mean)}")
        return cls(mean, cov, np.linalg.cholesky(clamp_spd(cov)))

    @classmethod
    def from_factor(cls, mean, factor):
        mean = np.atleast_1d(np.asarray(mean, dtype=float))
        factor = _as_matrix(factor, "factor")
        return cls(mean, sym(factor @ factor.T), factor)

    @property
    def dim(self):
        return len(self.mean)

    def cholesky(self):
        return np.linalg.cholesky(clamp_spd(self.covariance))

    def validate(self):
        cov = self.covariance
        err = np.linalg.norm(self.factor @ self.factor.T - cov) / np.linalg.norm(cov)
        if err >= 1e-10:
            raise ContractViolation(f"factor does not reproduce covariance (rel. err {err:.2e})")
        _check_symmetric(cov, "covariance")
        return self


def gaussian_w2_sq(a: GaussianComponent, b: GaussianComponent) -> float:
    if a.dim != b.dim:
        raise ContractViolation(f"dimension mismatch {a.dim} vs {b.dim}")
    diff = a.mean - b.mean
    return float(diff @ diff) + bures_distance_sq(a.covariance, b.covariance)


def bures_grad_cholesky(c: GaussianComponent, target_cov):
    """Gradient of ``L -> 1/2 B^2(L L^T, target)`` at ``c.factor``: ``(I - T) L``."""
    T = transport_map(c.covariance, target_cov)
    return (np.eye(c.dim) - T) @ c.factor


class BuresManifold(Manifold):
    """SPD(d) with the Bures-Wasserstein metric. Points are d x d arrays."""

    def __init__(self, dim: int):
        self.dim = int(dim)

    def __repr__(self):
        return f"BuresManifold({self.dim})"

    def check_point(self, p):
        p = _check_symmetric(p, "point")
        if p.shape != (self.dim, self.dim):
            raise ContractViolation(f"expected a {self.dim}x{self.dim} matrix, got {p.shape}")
        return p

    def dist_sq(self, p, q):
        return bures_distance_sq(self.check_point(p), self.check_point(q))

    def exp(self, p, v):
        p = self.check_point(p)
        return bures_exp(p, self._components(p, v))

    def log(self, p, q):
        p = self.check_point(p)
        return TangentVector(p, bures_log(p, self.check_point(q)))

    def norm(self, v):
        return bures_norm(v.base_point, v.components)

    def geodesic_step(self, p, q, eta):
        p = self.check_point(p)
        A = (1.0 - eta) * np.eye(self.dim) + eta * transport_map(p, self.check_point(q))
        return clamp_spd(A @ p @ A)


class GaussianManifold(Manifold):
    """Gaussian components ``(mean, covariance)`` under the W2 metric.

    Tangent vectors carry ``(mean_direction, symmetric_matrix)`` components.
    """

    def __init__(self, dim: int):
        self.dim = int(dim)

    def __repr__(self):
        return f"GaussianManifold({self.dim})"

    def check_point(self, p):
        if not isinstance(p, GaussianComponent):
            raise ContractViolation(f"expected a GaussianComponent, got {type(p).__name__}")
        if p.dim != self.dim:
            raise ContractViolation(f"expected dimension {self.dim}, got {p.dim}")
        return p

    def same_point(self, p, q):
        return p is q or (np.array_equal(p.mean, q.mean) and np.array_equal(p.covariance, q.covariance))

    def dist_sq(self, p, q):
        return gaussian_w2_sq(self.check_point(p), self.check_point(q))

    def pairwise_dist_sq(self, ps, qs):
        for x in itertools.chain(ps, qs):
            self.check_point(x)
        mp = np.stack([p.mean for p in ps])
        mq = np.stack([q.mean for q in qs])
        diff = mp[:, None, :] - mq[None, :, :]
        mean_term = np.einsum("ijk,ijk->ij", diff, diff)
        Sp = np.stack([p.covariance for p in ps])
        Sq = np.stack([q.covariance for q in qs])
        w, V = np.linalg.eigh(Sp)
        roots = (V * np.sqrt(np.maximum(w, TOL.eigen_floor))[:, None, :]) @ np.swapaxes(V, 1, 2)
        cross = roots[:, None] @ Sq[None, :] @ roots[:, None]
        cross = 0.5 * (cross + np.swapaxes(cross, 2, 3))
        root_trace = np.sqrt(np.maximum(np.linalg.eigvalsh(cross), 0.0)).sum(-1)
        trace_p = np.trace(Sp, axis1=1, axis2=2)
        trace_q = np.trace(Sq, axis1=1, axis2=2)
        bures = np.maximum(trace_p[:, None] + trace_q[None, :] - 2.0 * root_trace, 0.0)
        bures[(Sp[:, None] == Sq[None, :]).all(axis=(2, 3))] = 0.0
        return mean_term + bures

    def exp(self, p, v):
        self.check_point(p)
        dmean, xi = self._components(p, v)
        A = np.eye(self.dim) + lyapunov_solve(p.covariance, xi)
        if np.abs(np.linalg.eigvalsh(A)).min() < 1e-12:
            raise StepTooLargeError("I + L is singular; shrink the step")
        return _component(p.mean + dmean, A @ p.factor)

    def log(self, p, q):
        self.check_point(p)
        self.check_point(q)
        return TangentVector(p, (q.mean - p.mean, bures_log(p.covariance, q.covariance)))

    def norm(self, v):
        dmean, xi = v.components
        return math.sqrt(float(dmean @ dmean) + bures_norm(v.base_point.covariance, xi) ** 2)

    def geodesic_step(self, p, q, eta):
        # Equals exp_p(eta * log_p q); written as the factor update L <- L - eta (I - T) L.
        T = transport_map(p.covariance, q.covariance)
        factor = p.factor - eta * (np.eye(self.dim) - T) @ p.factor
        return _component(p.mean - eta * (p.mean - q.mean), factor)


def _component(mean, factor):
    cov = sym(factor @ factor.T)
    if not np.all(np.isfinite(cov)):
        raise StepTooLargeError("covariance update produced non-finite entries")
    if np.linalg.eigvalsh(cov).min() < TOL.eigen_floor:
        return GaussianComponent.from_covariance(mean, clamp_spd(cov))
    return GaussianComponent(mean, cov, factor)
