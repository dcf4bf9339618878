import itertools
import math

import numpy as np
import pytest
from scipy import stats

from qbary.barycenter import SgdConfig
from qbary.bures import GaussianComponent, GaussianManifold
from qbary.errors import ContractViolation
from qbary.group import GroupElement, GroupSpec, apply, quotient_distance
from qbary.samplers import (
    MraScenario,
    GmmScenario,
    default_template,
    ellipse_scenario,
    gmm5_scenario,
    gmm_log_density,
    gmm_sampler,
    mra_generate,
    mra_gibbs,
    mra_pipeline,
    mra_reconstruct,
    relative_error,
    sample_shifts,
    sample_signal,
    snr,
    unshift,
)


def three_component(jitter=0.0, seed=0):
    comps = tuple(GaussianComponent.from_covariance([float(i), 0.0], np.eye(2) * (1 + i)) for i in range(3))
    return GmmScenario(comps, jitter, jitter, GroupSpec.symmetric(3), seed)


def permutation_of(draw, truth):
    return tuple(next(j for j, t in enumerate(truth) if t is c) for c in draw)


def test_zero_jitter_draws_are_group_images():
    sc = three_component()
    for draw in gmm_sampler(sc).take(50):
        g = GroupElement(permutation_of(draw, sc.true_components))
        assert apply(g, sc.true_components) == draw


def test_permutation_frequencies_uniform():
    sc = three_component(seed=123)
    counts = dict.fromkeys(itertools.permutations(range(3)), 0)
    for draw in gmm_sampler(sc).take(6000):
        counts[permutation_of(draw, sc.true_components)] += 1
    observed = np.array(list(counts.values()))
    chi2 = float(((observed - 1000.0) ** 2 / 1000.0).sum())
    assert chi2 < stats.chi2.ppf(0.99, df=5)


def test_gmm_determinism_and_quotient_consistency():
    sc = gmm5_scenario(seed=8)
    a, b = gmm_sampler(sc).take(20), gmm_sampler(sc).take(20)
    raw = gmm_sampler(sc, apply_action=False).take(20)
    G, F = GroupSpec.symmetric(5), GaussianManifold(5)
    for x, y, z in zip(a, b, raw):
        for c1, c2 in zip(x, y):
            np.testing.assert_array_equal(c1.mean, c2.mean)
            np.testing.assert_array_equal(c1.covariance, c2.covariance)
        assert quotient_distance(x, z, G, F) == 0.0


def test_scenario_validation():
    c = GaussianComponent.from_covariance([0.0], [[1.0]])
    with pytest.raises(ContractViolation):
        GmmScenario((c, c))
    with pytest.raises(ContractViolation):
        GmmScenario((c,), jitter_mean_std=-1.0)


def test_log_density_peaks_at_truth():
    sc = gmm5_scenario(seed=1)
    best = gmm_log_density(sc.true_components, sc)
    assert all(gmm_log_density(d, sc) < best for d in gmm_sampler(sc).take(20))


def test_ellipse_scenario_facts():
    sc = ellipse_scenario()
    assert sc.K == 5
    for c in sc.true_components:
        np.testing.assert_array_equal(c.mean, [0.0, 0.0])
    np.testing.assert_allclose(sc.true_components[2].covariance, np.diag([1.0, 0.1]), atol=1e-15)


def test_mra_generate():
    x = default_template(6, seed=2)
    obs, shifts = mra_generate(MraScenario(x, 0.0, 30, seed=4), return_shifts=True)
    for y, s in zip(obs, shifts):
        np.testing.assert_array_equal(y, apply(GroupElement.shift(6, int(s)), x))
    np.testing.assert_array_equal(unshift(obs, shifts), np.tile(x, (30, 1)))
    sc = MraScenario(x, 0.5, 30, seed=4)
    np.testing.assert_array_equal(mra_generate(sc), mra_generate(sc))


def test_gibbs_single_observation_tiny_noise():
    y = default_template(10, seed=5)
    draws = mra_gibbs(y[None, :], 1e-6, 50, seed=0, burn_in=100)
    assert max(relative_error(d, y) for d in draws) < 1e-3


def test_gibbs_signal_step_moments():
    rng = np.random.default_rng(0)
    x = default_template(10)
    sigma, M = 0.7, 200
    obs, shifts = mra_generate(MraScenario(x, sigma, M, seed=3), return_shifts=True)
    target = unshift(obs, shifts).mean(axis=0)
    draws = np.array([sample_signal(obs, shifts, sigma, rng) for _ in range(10000)])
    se = sigma / math.sqrt(M) / math.sqrt(len(draws))
    assert np.all(np.abs(draws.mean(axis=0) - target) < 3 * se)


def test_gibbs_shift_step_finds_generating_shift():
    x = default_template(10)
    sc = MraScenario.from_snr(x, 16.0, 200, seed=6)
    obs, shifts = mra_generate(sc, return_shifts=True)
    rng = np.random.default_rng(1)
    samples = np.array([sample_shifts(obs, x, sc.noise_std, rng) for _ in range(50)])
    modal = np.array([np.bincount(col, minlength=10).argmax() for col in samples.T])
    assert np.mean(modal == shifts) >= 0.99


def test_gibbs_contracts_and_determinism():
    obs = mra_generate(MraScenario(default_template(8), 0.3, 20, seed=0))
    np.testing.assert_array_equal(mra_gibbs(obs, 0.3, 30, seed=5), mra_gibbs(obs, 0.3, 30, seed=5))
    with pytest.raises(ContractViolation):
        mra_gibbs(np.empty((0, 8)), 0.3, 10)
    with pytest.raises(ContractViolation):
        mra_gibbs(obs, 0.0, 10)


def test_reconstruct_single_orbit():
    v = default_template(7, seed=9)
    draws = [apply(GroupElement.shift(7, s % 7), v) for s in range(40)]
    est = mra_reconstruct(draws, SgdConfig(39, seed=0, eval_size=0))
    assert relative_error(est, v) < 1e-10


def test_noiseless_pipeline():
    sc = MraScenario(default_template(10), 1e-6, 200, seed=0)
    assert mra_pipeline(sc, sweeps=300, seed=0).relative_error < 1e-3


def test_snr_identities():
    assert snr(np.ones(5), 1.0) == 1.0
    x = default_template(6)
    assert snr(2 * x, 0.3) == 4 * snr(x, 0.3)
    assert snr(x, 0.6) == snr(x, 0.3) / 4
    with pytest.raises(ContractViolation):
        snr(np.zeros(3), 1.0)
    with pytest.raises(ContractViolation):
        snr(x, 0.0)
    assert snr(x, MraScenario.from_snr(x, 2.5).noise_std) == pytest.approx(2.5, rel=1e-14)


def test_relative_error_identities(rng):
    x = rng.standard_normal(8)
    assert relative_error(x, x) == 0.0
    assert relative_error(apply(GroupElement.shift(8, 3), x), x) == 0.0
    e = 0.1 * rng.standard_normal(8)
    assert relative_error(x + e, x) <= np.linalg.norm(e) / np.linalg.norm(x)
    with pytest.raises(ContractViolation):
        relative_error(x, np.zeros(8))
