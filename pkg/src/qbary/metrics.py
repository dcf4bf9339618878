"""Errors of an estimate against known true parameters, up to relabeling."""

from __future__ import annotations

import numpy as np

from .bures import GaussianComponent, GaussianManifold
from .group import GroupSpec, align, apply, infer_factor


def match_to_truth(estimate, truth):
    """Relabel ``estimate`` to best match ``truth`` (symmetric group, W2 cost)."""
    factor = infer_factor(truth)
    g = align(truth, estimate, GroupSpec.symmetric(len(truth)), factor).element
    return apply(g, estimate)


def component_errors(estimate, truth) -> dict:
    """Per-component errors after optimal matching.

    Keys: ``max_mean_error`` (largest Euclidean mean error), ``cov_error``
    (sum of Frobenius covariance errors, Gaussian tuples only) and
    ``quotient_distance``.
    """
    matched = match_to_truth(estimate, truth)
    if isinstance(truth[0], GaussianComponent):
        factor = GaussianManifold(truth[0].dim)
        mean_err = [float(np.linalg.norm(a.mean - b.mean)) for a, b in zip(matched, truth)]
        cov_err = sum(float(np.linalg.norm(a.covariance - b.covariance)) for a, b in zip(matched, truth))
        qd = float(np.sqrt(sum(factor.dist_sq(a, b) for a, b in zip(matched, truth))))
        return {"max_mean_error": max(mean_err), "cov_error": cov_err, "quotient_distance": qd}
    m = np.asarray(matched, dtype=float).reshape(len(truth), -1)
    t = np.asarray(truth, dtype=float).reshape(len(truth), -1)
    err = np.linalg.norm(m - t, axis=1)
    return {"max_mean_error": float(err.max()), "quotient_distance": float(np.sqrt((err**2).sum()))}
