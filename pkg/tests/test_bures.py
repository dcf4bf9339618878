import numpy as np
import pytest
from conftest import commuting_bures_sq, random_spd

from qbary.bures import (
    BuresManifold,
    GaussianComponent,
    GaussianManifold,
    bures_distance_sq,
    bures_exp,
    bures_grad_cholesky,
    bures_log,
    bures_norm,
    gaussian_w2_sq,
    lyapunov_solve,
    spd_sqrt,
    transport_map,
)
from qbary.errors import ContractViolation, SingularMatrixError, StepTooLargeError


def rel(a, b):
    return np.linalg.norm(a - b) / np.linalg.norm(b)


def test_spd_sqrt_examples(rng):
    np.testing.assert_allclose(spd_sqrt(np.eye(3)), np.eye(3), atol=1e-15)
    np.testing.assert_allclose(spd_sqrt(np.diag([4.0, 9.0])), np.diag([2.0, 3.0]), atol=1e-14)
    for d in range(1, 7):
        S = random_spd(rng, d)
        R = spd_sqrt(S)
        assert rel(R @ R, S) < 1e-10
        assert np.linalg.eigvalsh(R).min() > 0


def test_spd_sqrt_rejects_asymmetric():
    with pytest.raises(ContractViolation):
        spd_sqrt(np.array([[1.0, 0.5], [0.0, 1.0]]))


def test_bures_examples():
    assert bures_distance_sq(np.eye(2), np.eye(2)) == pytest.approx(0.0, abs=1e-12)
    assert commuting_bures_sq([4, 4], [1, 1]) == 2.0
    assert bures_distance_sq(4 * np.eye(2), np.eye(2)) == pytest.approx(2.0, abs=1e-12)
    assert commuting_bures_sq([1, 4], [9, 16]) == 8.0
    assert bures_distance_sq(np.diag([1.0, 4.0]), np.diag([9.0, 16.0])) == pytest.approx(8.0, abs=1e-12)


def test_bures_symmetric_and_commuting_closed_form(rng):
    for _ in range(200):
        d = int(rng.integers(1, 6))
        A, B = random_spd(rng, d), random_spd(rng, d)
        ab, ba = bures_distance_sq(A, B), bures_distance_sq(B, A)
        assert abs(ab - ba) <= 1e-9 * max(ab, 1e-300) + 1e-14
        # simultaneously diagonalizable pair
        Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
        l1, l2 = rng.uniform(0.1, 3, d), rng.uniform(0.1, 3, d)
        S1, S2 = Q @ np.diag(l1) @ Q.T, Q @ np.diag(l2) @ Q.T
        assert bures_distance_sq(S1, S2) == pytest.approx(commuting_bures_sq(l1, l2), abs=1e-9)


def test_gaussian_w2_examples():
    a = GaussianComponent.from_covariance([0.0, 0.0], np.eye(2))
    b = GaussianComponent.from_covariance([3.0, 4.0], np.eye(2))
    assert gaussian_w2_sq(a, a) == pytest.approx(0.0, abs=1e-12)
    assert gaussian_w2_sq(a, b) == pytest.approx(25.0, abs=1e-12)
    c = GaussianComponent.from_covariance([0.0, 0.0], np.diag([1.0, 4.0]))
    e = GaussianComponent.from_covariance([1.0, 0.0], np.diag([4.0, 4.0]))
    assert gaussian_w2_sq(c, e) == pytest.approx(1.0 + commuting_bures_sq([1, 4], [4, 4]), abs=1e-12)
    assert gaussian_w2_sq(c, e) == pytest.approx(2.0, abs=1e-12)
    with pytest.raises(ContractViolation):
        gaussian_w2_sq(a, GaussianComponent.from_covariance([0.0], [[1.0]]))


def test_gaussian_manifold_distance_is_w2(rng):
    G = GaussianManifold(3)
    comps = [GaussianComponent.from_covariance(rng.standard_normal(3), random_spd(rng, 3)) for _ in range(4)]
    C = G.pairwise_dist_sq(comps, comps)
    for i, a in enumerate(comps):
        for j, b in enumerate(comps):
            assert G.dist(a, b) ** 2 == pytest.approx(gaussian_w2_sq(a, b), rel=1e-14)
            assert C[i, j] == pytest.approx(gaussian_w2_sq(a, b), rel=1e-9, abs=1e-12)


def test_transport_map_examples(rng):
    S = random_spd(rng, 3)
    np.testing.assert_allclose(transport_map(S, S), np.eye(3), atol=1e-10)
    np.testing.assert_allclose(transport_map(np.eye(3), S), spd_sqrt(S), atol=1e-12)
    np.testing.assert_allclose(transport_map(np.diag([1.0, 4.0]), np.diag([9.0, 16.0])), np.diag([3.0, 2.0]), atol=1e-12)


def test_transport_pushforward(rng):
    for _ in range(500):
        d = int(rng.integers(2, 7))
        S1, S2 = random_spd(rng, d), random_spd(rng, d)
        T = transport_map(S1, S2)
        np.testing.assert_array_equal(T, T.T)
        assert rel(T @ S1 @ T, S2) < 1e-8


def test_transport_singular_source():
    with pytest.raises(SingularMatrixError) as info:
        transport_map(np.diag([1.0, 1e-14]), np.eye(2))
    assert info.value.eigenvalue == pytest.approx(1e-14)


def half_bures_sq_of_factor(L, target):
    return 0.5 * bures_distance_sq(L @ L.T, target)


def finite_difference_grad(L, target, h=1e-6):
    grad = np.zeros_like(L)
    for idx in np.ndindex(*L.shape):
        E = np.zeros_like(L)
        E[idx] = h
        grad[idx] = (half_bures_sq_of_factor(L + E, target) - half_bures_sq_of_factor(L - E, target)) / (2 * h)
    return grad


def test_gradient_examples():
    c = GaussianComponent.from_covariance([0.0], [[1.0]])
    np.testing.assert_allclose(bures_grad_cholesky(c, [[4.0]]), [[-1.0]], atol=1e-14)
    S = np.array([[2.0, 0.3], [0.3, 1.0]])
    same = GaussianComponent.from_covariance([0.0, 0.0], S)
    np.testing.assert_allclose(bures_grad_cholesky(same, S), np.zeros((2, 2)), atol=1e-10)


def test_gradient_matches_finite_differences(rng):
    for _ in range(20):
        c = GaussianComponent.from_covariance(np.zeros(3), random_spd(rng, 3))
        target = random_spd(rng, 3)
        g = bures_grad_cholesky(c, target)
        assert rel(g, finite_difference_grad(c.factor, target)) < 1e-5


def test_lyapunov_examples(rng):
    xi = random_spd(rng, 3) - np.eye(3)
    np.testing.assert_allclose(lyapunov_solve(np.eye(3), xi), xi / 2, atol=1e-14)
    sig = np.array([1.0, 2.0, 5.0])
    expected = xi / (sig[:, None] + sig[None, :])
    np.testing.assert_allclose(lyapunov_solve(np.diag(sig), xi), expected, atol=1e-14)
    S = random_spd(rng, 5)
    xi = rng.standard_normal((5, 5))
    xi = xi + xi.T
    L = lyapunov_solve(S, xi)
    assert np.linalg.norm(L @ S + S @ L - xi) / np.linalg.norm(xi) < 1e-10
    with pytest.raises(ContractViolation):
        lyapunov_solve(S, rng.standard_normal((5, 5)))


def test_exp_examples():
    S = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_allclose(bures_exp(S, np.zeros((2, 2))), S, atol=1e-15)
    sigma, xi = 3.0, 1.2
    assert bures_exp([[sigma]], [[xi]])[0, 0] == pytest.approx((1 + xi / (2 * sigma)) ** 2 * sigma, rel=1e-14)
    with pytest.raises(StepTooLargeError):
        bures_exp([[1.0]], [[-2.0]])  # L = -1


def test_log_examples(rng):
    S = random_spd(rng, 3)
    np.testing.assert_allclose(bures_log(S, S), np.zeros((3, 3)), atol=1e-10)
    a, b = 2.0, 7.0
    assert bures_log([[a]], [[b]])[0, 0] == pytest.approx(2 * (np.sqrt(a * b) - a), rel=1e-14)


def test_exp_log_roundtrip_and_norm(rng):
    for _ in range(500):
        d = int(rng.integers(1, 6))
        S1, S2 = random_spd(rng, d), random_spd(rng, d)
        xi = bures_log(S1, S2)
        assert rel(bures_exp(S1, xi), S2) < 1e-8
        assert bures_norm(S1, xi) == pytest.approx(np.sqrt(bures_distance_sq(S1, S2)), rel=1e-8, abs=1e-10)


def test_gaussian_manifold_step_matches_exp_log(rng):
    G = GaussianManifold(3)
    for _ in range(50):
        p = GaussianComponent.from_covariance(rng.standard_normal(3), random_spd(rng, 3))
        q = GaussianComponent.from_covariance(rng.standard_normal(3), random_spd(rng, 3))
        eta = rng.uniform(0.05, 1.0)
        a = G.geodesic_step(p, q, eta)
        b = G.exp(p, G.log(p, q) * eta)
        np.testing.assert_allclose(a.mean, b.mean, atol=1e-12)
        assert rel(a.covariance, b.covariance) < 1e-9
        a.validate()
        back = G.exp(p, G.log(p, q))
        assert rel(back.covariance, q.covariance) < 1e-8


def test_bures_manifold_1d_step():
    B = BuresManifold(1)
    # sqrt of the iterate moves linearly
    out = B.geodesic_step(np.array([[1.0]]), np.array([[9.0]]), 0.5)
    assert out[0, 0] == pytest.approx(4.0, rel=1e-14)
