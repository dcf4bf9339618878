"""Stochastic-gradient barycenters of label-switched posterior draws.

Three drivers share one loop. ``sgd_mean`` averages single points on a
manifold, ``sgd_quotient`` averages K-tuples modulo a finite group by
aligning every draw to the current estimate before stepping, and
``sgd_gaussian_mixture`` specializes the latter to Gaussian components with
the Cholesky-factor update. The estimate is one representative of the orbit
whose uniform measure is the barycenter.
"""

from __future__ import annotations

import logging
import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Any, Callable, Sequence

import numpy as np

from .bures import GaussianComponent, GaussianManifold, clamp_spd
from .errors import ContractViolation, SamplerExhausted, SingularMatrixError, StepTooLargeError
from .group import GroupSpec, align, apply, infer_factor
from .manifold import Manifold, ProductManifold
from .stream import SampleStream

log = logging.getLogger(__name__)

MAX_STEP_HALVINGS = 30


class ScheduleKind(str, Enum):
    HARMONIC = "harmonic"
    SHIFTED_HARMONIC = "shifted"


@dataclass(frozen=True)
class StepSchedule:
    """Step sizes ``scale / (t + offset)``; the default is the plain ``1/t``."""

    kind: ScheduleKind = ScheduleKind.HARMONIC
    scale: float = 1.0
    offset: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", ScheduleKind(self.kind))
        if not self.scale > 0:
            raise ContractViolation(f"step scale must be positive, got {self.scale}")
        if self.offset < 0:
            raise ContractViolation(f"step offset must be nonnegative, got {self.offset}")
        if self.kind is ScheduleKind.HARMONIC and self.offset != 0:
            raise ContractViolation("harmonic schedule has no offset; use kind='shifted'")

    def __call__(self, t: int) -> float:
        return self.scale / (t + self.offset)


@dataclass(frozen=True)
class SgdConfig:
    iterations: int
    seed: int | None = None
    schedule: StepSchedule = field(default_factory=StepSchedule)
    trace_every: int | None = None  # None: about 50 trace points
    eval_size: int = 256  # 0 disables objective tracing
    tail_average: float = 0.0  # fraction of final iterates to average; 0 is off

    def __post_init__(self):
        if self.iterations < 1:
            raise ContractViolation(f"iterations must be >= 1, got {self.iterations}")
        if self.trace_every is not None and self.trace_every < 1:
            raise ContractViolation(f"trace_every must be positive, got {self.trace_every}")
        if not 0.0 <= self.tail_average <= 1.0:
            raise ContractViolation(f"tail_average must lie in [0, 1], got {self.tail_average}")

    @property
    def trace_interval(self) -> int:
        return self.trace_every or max(1, self.iterations // 50)

    def echo(self) -> dict:
        out = asdict(self)
        out["schedule"] = {"kind": self.schedule.kind.value, "scale": self.schedule.scale, "offset": self.schedule.offset}
        return out


@dataclass
class BarycenterReport:
    estimate: Any
    objective_trace: list = field(default_factory=list)  # (iteration, objective) pairs
    wall_time: float = 0.0
    config: dict = field(default_factory=dict)
    last_iterate: Any = None


def _as_stream(sampler, cfg: SgdConfig):
    if isinstance(sampler, SampleStream):
        if cfg.seed is not None:
            sampler.reset(cfg.seed)
        return sampler
    if isinstance(sampler, (list, tuple)):
        return SampleStream.from_samples(sampler, cfg.seed)
    return iter(sampler)


def _evaluation_set(stream, cfg: SgdConfig, eval_samples):
    if eval_samples is not None:
        return list(eval_samples)
    if cfg.eval_size == 0 or not isinstance(stream, SampleStream):
        return []
    base = stream.seed if cfg.seed is None else cfg.seed
    seed = None if base is None else np.random.SeedSequence(base, spawn_key=(0xE7A1,))
    return stream.fork(seed).take(cfg.eval_size)


def _run(stream, cfg, init, step: Callable, objective: Callable | None, average_step: Callable, name: str):
    """Shared SGD loop; ``step(p, q, eta)`` returns the next iterate."""
    if init is None:
        try:
            init = next(stream)
        except StopIteration:
            raise SamplerExhausted("sampler yielded no draw to initialize from", 0) from None
    p = init
    T = cfg.iterations
    every = cfg.trace_interval
    tail_start = T - int(round(cfg.tail_average * T)) + 1 if cfg.tail_average > 0 else None
    averaged = None
    trace = []
    eval_time = 0.0
    start = time.perf_counter()
    if objective is not None:
        e0 = time.perf_counter()
        trace.append((0, objective(p)))
        eval_time += time.perf_counter() - e0
    for t in range(1, T + 1):
        try:
            q = next(stream)
        except StopIteration:
            raise SamplerExhausted(f"sampler exhausted after {t - 1} of {T} iterations", t - 1) from None
        p = step(p, q, cfg.schedule(t))
        if tail_start is not None and t >= tail_start:
            n = t - tail_start + 1
            averaged = p if averaged is None else average_step(averaged, p, 1.0 / n)
        if objective is not None and (t % every == 0 or t == T):
            e0 = time.perf_counter()
            trace.append((t, objective(p)))
            eval_time += time.perf_counter() - e0
    wall = time.perf_counter() - start - eval_time
    echo = dict(cfg.echo(), algorithm=name)
    estimate = averaged if averaged is not None else p
    return BarycenterReport(estimate, trace, wall, echo, last_iterate=p)


def sgd_mean(sampler, manifold: Manifold, cfg: SgdConfig, init=None, eval_samples=None) -> BarycenterReport:
    """Riemannian barycenter of single points: ``p <- exp_p(eta_t log_p(q_t))``."""
    stream = _as_stream(sampler, cfg)
    evals = _evaluation_set(stream, cfg, eval_samples)

    def objective(p):
        return float(np.mean([manifold.dist_sq(p, q) for q in evals]))

    return _run(stream, cfg, init, manifold.geodesic_step, objective if evals else None, manifold.geodesic_step, "mean")


def estimate_objective(candidate, samples: Sequence, G: GroupSpec, factor: Manifold | None = None) -> float:
    """Monte Carlo barycenter objective: mean squared quotient distance to the samples."""
    if len(samples) == 0:
        raise ContractViolation("estimate_objective needs at least one sample")
    factor = factor or infer_factor(candidate)
    return sum(align(candidate, q, G, factor).cost for q in samples) / len(samples)


def sgd_quotient(
    sampler, G: GroupSpec, cfg: SgdConfig, factor: Manifold | None = None, init=None, eval_samples=None
) -> BarycenterReport:
    """Barycenter of K-tuples modulo ``G``.

    Each draw is aligned to the current estimate (assignment for the symmetric
    group, enumeration of shifts for the cyclic group) and every factor then
    takes a geodesic step of size ``eta_t`` toward its matched counterpart.
    """
    stream = _as_stream(sampler, cfg)
    evals = _evaluation_set(stream, cfg, eval_samples)
    if init is None:
        try:
            init = next(stream)
        except StopIteration:
            raise SamplerExhausted("sampler yielded no draw to initialize from", 0) from None
    factor = factor or infer_factor(init)
    product = ProductManifold(factor, G.degree)
    product.check_point(init)

    def step(p, q, eta):
        g = align(p, q, G, factor).element
        return product.geodesic_step(p, apply(g, q), eta)

    def objective(p):
        return estimate_objective(p, evals, G, factor)

    return _run(stream, cfg, init, step, objective if evals else None, product.geodesic_step, f"quotient-{G.kind.value}")


def _gaussian_step(factor: GaussianManifold, p: GaussianComponent, q: GaussianComponent, eta: float):
    for _ in range(MAX_STEP_HALVINGS + 1):
        try:
            return factor.geodesic_step(p, q, eta)
        except SingularMatrixError as err:
            log.warning("estimate covariance singular (eigenvalue %.3e); clamping", err.eigenvalue)
            p = GaussianComponent.from_covariance(p.mean, clamp_spd(p.covariance))
        except StepTooLargeError:
            eta *= 0.5
    raise StepTooLargeError(f"covariance update failed after {MAX_STEP_HALVINGS} step halvings")


def sgd_gaussian_mixture(sampler, G: GroupSpec, cfg: SgdConfig, init=None, eval_samples=None) -> BarycenterReport:
    """Barycenter of equally weighted Gaussian mixtures modulo ``G``.

    Draws are K-tuples of :class:`GaussianComponent`. After alignment under the
    Gaussian W2 cost, means move by ``mu -= eta (mu - mu_matched)`` and factors
    by ``L -= eta (I - T) L`` with ``T`` the transport map to the matched
    covariance.
    """
    stream = _as_stream(sampler, cfg)
    evals = _evaluation_set(stream, cfg, eval_samples)
    if init is None:
        try:
            init = next(stream)
        except StopIteration:
            raise SamplerExhausted("sampler yielded no draw to initialize from", 0) from None
    init = tuple(init)
    factor = GaussianManifold(init[0].dim)
    product = ProductManifold(factor, G.degree)
    product.check_point(init)

    def step(p, q, eta):
        g = align(p, q, G, factor).element
        return tuple(_gaussian_step(factor, a, b, eta) for a, b in zip(p, apply(g, tuple(q))))

    def objective(p):
        return estimate_objective(p, evals, G, factor)

    def average_step(avg, p, w):
        return tuple(_gaussian_step(factor, a, b, w) for a, b in zip(avg, p))

    return _run(stream, cfg, init, step, objective if evals else None, average_step, f"gaussian-{G.kind.value}")
