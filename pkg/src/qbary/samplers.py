"""Synthetic posterior sources and the multi-reference alignment pipeline.

The mixture simulator jitters a fixed set of true components (Gaussian noise on
means, log-normal noise on covariance eigenvalues) and scrambles the labels of
every draw with a uniformly random group element, which is exactly the label
switching an MCMC sampler exhibits on a symmetric posterior.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .barycenter import SgdConfig, sgd_quotient
from .bures import GaussianComponent, GaussianManifold, sym
from .errors import ContractViolation
from .group import GroupSpec, align, align_cyclic, apply
from .manifold import Euclidean
from .stream import SampleStream


@dataclass(frozen=True, eq=False)
class GmmScenario:
    true_components: tuple
    jitter_mean_std: float = 0.0
    jitter_cov_log_std: float = 0.0
    group: GroupSpec | None = None
    seed: int | None = 0
    name: str = "custom"

    def __post_init__(self):
        comps = tuple(self.true_components)
        object.__setattr__(self, "true_components", comps)
        if not comps:
            raise ContractViolation("scenario needs at least one component")
        if self.jitter_mean_std < 0 or self.jitter_cov_log_std < 0:
            raise ContractViolation("jitter standard deviations must be nonnegative")
        if self.group is None:
            object.__setattr__(self, "group", GroupSpec.symmetric(len(comps)))
        elif self.group.degree != len(comps):
            raise ContractViolation(f"group degree {self.group.degree} != {len(comps)} components")
        factor = GaussianManifold(comps[0].dim)
        C = factor.pairwise_dist_sq(comps, comps)
        off = C[~np.eye(len(comps), dtype=bool)]
        if off.size and off.min() <= 0.0:
            raise ContractViolation("true components must be pairwise distinct")

    @property
    def K(self):
        return len(self.true_components)

    @property
    def dim(self):
        return self.true_components[0].dim


def _jittered(scenario: GmmScenario, eig, rng):
    K, d = scenario.K, scenario.dim
    mean_noise = rng.standard_normal((K, d))
    log_noise = rng.standard_normal((K, d))
    out = []
    for i, comp in enumerate(scenario.true_components):
        mean = comp.mean + scenario.jitter_mean_std * mean_noise[i] if scenario.jitter_mean_std else comp.mean
        if scenario.jitter_cov_log_std:
            w, V = eig[i]
            cov = sym((V * (w * np.exp(scenario.jitter_cov_log_std * log_noise[i]))) @ V.T)
            out.append(GaussianComponent.from_covariance(mean, cov))
        elif mean is comp.mean:
            out.append(comp)
        else:
            out.append(GaussianComponent(mean, comp.covariance, comp.factor))
    return tuple(out)


def gmm_sampler(scenario: GmmScenario, apply_action: bool = True) -> SampleStream:
    """Stream of label-switched K-tuples of Gaussian components.

    With ``apply_action=False`` the same random numbers are consumed but the
    group element is not applied, giving the un-scrambled counterpart draw.
    """
    eig = [np.linalg.eigh(c.covariance) for c in scenario.true_components]

    def draw(rng):
        comps = _jittered(scenario, eig, rng)
        g = scenario.group.random_element(rng)
        return apply(g, comps) if apply_action else comps

    return SampleStream.from_draw(draw, scenario.seed, name=f"gmm:{scenario.name}")


def mean_only_sampler(means, jitter_std: float, group: GroupSpec | None = None, seed=0, apply_action=True):
    """Stream of label-switched ``(K, d)`` mean tuples with isotropic Gaussian jitter."""
    means = np.atleast_2d(np.asarray(means, dtype=float))
    if means.shape[0] == 1 and means.shape[1] > 1 and group is None:
        means = means.T
    K = len(means)
    group = group or GroupSpec.symmetric(K)

    def draw(rng):
        x = means + jitter_std * rng.standard_normal(means.shape)
        g = group.random_element(rng)
        return apply(g, x) if apply_action else x

    return SampleStream.from_draw(draw, seed, name="mean-only")


def gmm_log_density(draw, scenario: GmmScenario) -> float:
    """Log density of a draw under the jitter model, after matching it to the truth.

    Directions with zero jitter are left out, so values are only comparable
    across draws from the same scenario.
    """
    truth = scenario.true_components
    factor = GaussianManifold(scenario.dim)
    g = align(truth, tuple(draw), GroupSpec.symmetric(scenario.K), factor).element
    matched = apply(g, tuple(draw))
    total = 0.0
    for comp, obs in zip(truth, matched):
        if scenario.jitter_mean_std:
            z = (obs.mean - comp.mean) / scenario.jitter_mean_std
            total += float(-0.5 * z @ z - len(z) * math.log(scenario.jitter_mean_std * math.sqrt(2 * math.pi)))
        if scenario.jitter_cov_log_std:
            w, V = np.linalg.eigh(comp.covariance)
            ratio = np.einsum("ij,jk,ki->i", V.T, obs.covariance, V) / w
            z = np.log(np.maximum(ratio, 1e-300)) / scenario.jitter_cov_log_std
            total += float(-0.5 * z @ z - len(z) * math.log(scenario.jitter_cov_log_std * math.sqrt(2 * math.pi)))
    return total


def gmm5_scenario(jitter: float = 0.05, seed: int | None = 0) -> GmmScenario:
    """Five Gaussians in R^5 with means 0.5 e_i and covariances 0.4 I."""
    comps = tuple(GaussianComponent.from_covariance(0.5 * np.eye(5)[i], 0.4 * np.eye(5)) for i in range(5))
    return GmmScenario(comps, jitter, jitter, GroupSpec.symmetric(5), seed, "gmm5")


ELLIPSE_ANGLES = (-math.pi / 12, -math.pi / 24, 0.0, math.pi / 24, math.pi / 12)


def rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


def ellipse_scenario(jitter_mean_std: float = 0.05, jitter_cov_log_std: float = 0.1, seed: int | None = 0) -> GmmScenario:
    """Five zero-mean Gaussians in R^2 whose covariances are diag(1, 0.1) rotated by small angles."""
    M = np.diag([1.0, 0.1])
    comps = []
    for theta in ELLIPSE_ANGLES:
        R = rotation(theta)
        comps.append(GaussianComponent.from_covariance(np.zeros(2), sym(R @ M @ R.T)))
    return GmmScenario(tuple(comps), jitter_mean_std, jitter_cov_log_std, GroupSpec.symmetric(5), seed, "ellipse")


def meanonly1d_scenario_means(K: int = 5) -> np.ndarray:
    return np.arange(K, dtype=float).reshape(K, 1)


# --- multi-reference alignment -------------------------------------------------


@dataclass(frozen=True, eq=False)
class MraScenario:
    template: np.ndarray
    noise_std: float
    num_observations: int = 200
    seed: int | None = 0

    def __post_init__(self):
        x = np.asarray(self.template, dtype=float)
        object.__setattr__(self, "template", x)
        if x.ndim != 1 or len(x) < 2:
            raise ContractViolation("template must be a vector of length >= 2")
        if not self.noise_std >= 0:
            raise ContractViolation(f"noise_std must be nonnegative, got {self.noise_std}")
        if self.num_observations < 1:
            raise ContractViolation("num_observations must be positive")

    @property
    def K(self):
        return len(self.template)

    @classmethod
    def from_snr(cls, template, snr_value: float, num_observations=200, seed=0):
        if not snr_value > 0:
            raise ContractViolation(f"SNR must be positive, got {snr_value}")
        x = np.asarray(template, dtype=float)
        return cls(x, math.sqrt(float(x @ x) / (len(x) * snr_value)), num_observations, seed)


def default_template(K: int = 10, seed: int = 0) -> np.ndarray:
    """A fixed random signal rescaled so that ``||x||^2 = K`` (SNR = 1/sigma^2)."""
    x = np.random.default_rng(seed).standard_normal(K)
    return x * math.sqrt(K) / np.linalg.norm(x)


def _shift_table(K):
    # row s holds the indices of g_s . x, i.e. x[(i + s) % K]
    return (np.arange(K)[None, :] + np.arange(K)[:, None]) % K


def mra_generate(scenario: MraScenario, return_shifts: bool = False):
    """Observations ``y_j = g_j . x + sigma * noise`` with uniformly random cyclic shifts."""
    rng = np.random.default_rng(scenario.seed)
    K, M = scenario.K, scenario.num_observations
    shifts = rng.integers(K, size=M)
    noise = rng.standard_normal((M, K))
    obs = scenario.template[_shift_table(K)[shifts]] + scenario.noise_std * noise
    return (obs, shifts) if return_shifts else obs


def shift_log_weights(observations, x, sigma):
    """Unnormalized log posterior of each shift for each observation, shape (M, K)."""
    table = x[_shift_table(len(x))]
    d2 = ((observations[:, None, :] - table[None, :, :]) ** 2).sum(-1)
    return -d2 / (2.0 * sigma**2)


def sample_shifts(observations, x, sigma, rng):
    """Gibbs step for the latent shifts given the signal."""
    logw = shift_log_weights(observations, x, sigma)
    logw -= logw.max(axis=1, keepdims=True)
    w = np.exp(logw)
    cdf = np.cumsum(w, axis=1)
    u = rng.random(len(observations)) * cdf[:, -1]
    return np.minimum((cdf < u[:, None]).sum(axis=1), len(x) - 1)


def unshift(observations, shifts):
    """Undo each observation's shift: row j becomes ``g_j^{-1} . y_j``."""
    K = observations.shape[1]
    idx = (np.arange(K)[None, :] - np.asarray(shifts)[:, None]) % K
    return np.take_along_axis(observations, idx, axis=1)


def sample_signal(observations, shifts, sigma, rng):
    """Gibbs step for the signal under a flat prior: N(aligned mean, sigma^2/M I)."""
    aligned = unshift(observations, shifts).mean(axis=0)
    return aligned + sigma / math.sqrt(len(observations)) * rng.standard_normal(len(aligned))


def mra_gibbs(observations, sigma: float, iters: int, seed=None, burn_in: int = 100, init=None) -> np.ndarray:
    """Gibbs chain over (shifts, signal); returns ``iters`` signal draws after ``burn_in`` sweeps."""
    observations = np.atleast_2d(np.asarray(observations, dtype=float))
    if observations.shape[0] == 0 or observations.size == 0:
        raise ContractViolation("mra_gibbs needs at least one observation")
    if not sigma > 0:
        raise ContractViolation(f"sigma must be positive, got {sigma}")
    if iters < 1 or burn_in < 0:
        raise ContractViolation("iters must be >= 1 and burn_in >= 0")
    rng = np.random.default_rng(seed)
    x = observations[0].copy() if init is None else np.asarray(init, dtype=float).copy()
    draws = np.empty((iters, observations.shape[1]))
    for sweep in range(burn_in + iters):
        shifts = sample_shifts(observations, x, sigma, rng)
        x = sample_signal(observations, shifts, sigma, rng)
        if sweep >= burn_in:
            draws[sweep - burn_in] = x
    return draws


def mra_reconstruct(signal_draws, cfg: SgdConfig, return_reference: bool = False):
    """Barycenter of the draws under cyclic shifts, then the average of the draws aligned to it."""
    draws = np.atleast_2d(np.asarray(signal_draws, dtype=float))
    N, K = draws.shape
    G = GroupSpec.cyclic(K)
    factor = Euclidean(1)
    rows = list(draws)
    stream = SampleStream.from_samples(rows, cfg.seed, resample=cfg.iterations >= N)
    report = sgd_quotient(stream, G, cfg, factor=factor)
    reference = np.asarray(report.estimate, dtype=float)
    aligned = np.stack([apply(align_cyclic(reference, y, factor).element, y) for y in rows])
    estimate = aligned.mean(axis=0)
    return (estimate, reference) if return_reference else estimate


def snr(x, sigma: float) -> float:
    x = np.asarray(x, dtype=float)
    if not sigma > 0:
        raise ContractViolation(f"sigma must be positive, got {sigma}")
    energy = float(x @ x)
    if energy == 0.0:
        raise ContractViolation("signal must be nonzero")
    return energy / (len(x) * sigma**2)


def relative_error(estimate, truth, G: GroupSpec | None = None) -> float:
    """``min_g ||estimate - g . truth|| / ||truth||`` over the group (cyclic by default)."""
    est = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if est.shape != truth.shape:
        raise ContractViolation(f"shape mismatch {est.shape} vs {truth.shape}")
    scale = float(np.linalg.norm(truth))
    if scale == 0.0:
        raise ContractViolation("truth must be nonzero")
    G = G or GroupSpec.cyclic(len(truth))
    return min(float(np.linalg.norm(est - apply(g, truth))) for g in G.elements()) / scale


@dataclass
class MraResult:
    snr: float
    sigma: float
    relative_error: float
    estimate: np.ndarray = field(repr=False)


def mra_pipeline(
    scenario: MraScenario, sweeps: int = 2000, burn_in: int = 100, sgd_iterations: int | None = None, seed: int = 0
) -> MraResult:
    """Generate observations, run the Gibbs chain, reconstruct, and score the result."""
    obs = mra_generate(scenario)
    sigma = scenario.noise_std
    chain_seed, sgd_seed = np.random.SeedSequence(seed).spawn(2)
    draws = mra_gibbs(obs, sigma, sweeps, seed=chain_seed, burn_in=burn_in)
    T = sgd_iterations or max(1, sweeps - 1)
    cfg = SgdConfig(T, seed=int(sgd_seed.generate_state(1)[0]), eval_size=0)
    est = mra_reconstruct(draws, cfg)
    return MraResult(snr(scenario.template, sigma), sigma, relative_error(est, scenario.template), est)
