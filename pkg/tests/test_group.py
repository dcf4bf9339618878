import itertools
import math

import numpy as np
import pytest
from conftest import random_spd

from qbary.bures import GaussianComponent, GaussianManifold
from qbary.errors import ContractViolation, EnumerationTooLarge
from qbary.group import (
    GroupElement,
    GroupKind,
    GroupSpec,
    align,
    align_cyclic,
    align_symmetric,
    apply,
    assignment_cost,
    brute_force_align,
    cost_matrix,
    orbit,
    quotient_distance,
    solve_lap,
    sort_align_1d,
)
from qbary.manifold import Euclidean, ProductManifold


def brute_lap(C):
    n = len(C)
    return min(assignment_cost(C, perm) for perm in itertools.permutations(range(n)))


def test_element_composition_matches_action(rng):
    G = GroupSpec.symmetric(5)
    p = rng.standard_normal((5, 2))
    for _ in range(50):
        g, h = G.random_element(rng), G.random_element(rng)
        np.testing.assert_array_equal(apply(g * h, p), apply(g, apply(h, p)))
        np.testing.assert_array_equal(apply(g.inverse(), apply(g, p)), p)
    with pytest.raises(ContractViolation):
        GroupElement((0, 0, 1))


def test_group_spec_basics():
    assert GroupSpec.symmetric(4).order == 24
    assert GroupSpec.cyclic(4).order == 4
    assert GroupSpec.trivial(4).order == 1
    assert GroupSpec.cyclic(3).kind is GroupKind.CYCLIC
    els = list(GroupSpec.symmetric(3).elements())
    assert [g.mapping for g in els] == sorted(itertools.permutations(range(3)))
    assert GroupSpec.cyclic(3).contains(GroupElement.shift(3, 2))
    assert not GroupSpec.cyclic(3).contains(GroupElement((1, 0, 2)))


def test_apply_and_orbit_examples():
    p = ("a", "b", "c")
    assert apply(GroupElement.identity(3), p) == p
    assert set(orbit(("a", "b"), GroupSpec.symmetric(2))) == {("a", "b"), ("b", "a")}
    assert orbit(p, GroupSpec.cyclic(3)) == [("a", "b", "c"), ("b", "c", "a"), ("c", "a", "b")]
    with pytest.raises(EnumerationTooLarge):
        orbit(tuple(range(8)), GroupSpec.symmetric(8))


def test_solve_lap_examples():
    assert solve_lap([[0, 1], [1, 0]]) == ((0, 1), 0.0)
    C = [[4, 1, 3], [2, 0, 5], [3, 2, 2]]
    assert solve_lap(C) == ((1, 0, 2), 5.0)
    assert brute_lap(np.array(C, dtype=float)) == 5.0
    assert solve_lap([[1, 1], [1, 1]]) == ((0, 1), 2.0)
    with pytest.raises(ContractViolation):
        solve_lap([[0.0, np.nan], [1.0, 0.0]])
    with pytest.raises(ContractViolation):
        solve_lap([[0.0, 1.0]])


def test_solve_lap_matches_brute_force(rng):
    for trial in range(300):
        K = int(rng.integers(2, 7))
        C = rng.integers(0, 4, (K, K)).astype(float) if trial % 3 == 0 else rng.random((K, K)) * 10
        mapping, total = solve_lap(C)
        assert sorted(mapping) == list(range(K))
        assert total == brute_lap(C)
        assert total == assignment_cost(C, mapping)


def test_solve_lap_ties_lexicographic(rng):
    for _ in range(100):
        K = int(rng.integers(2, 6))
        C = rng.integers(0, 2, (K, K)).astype(float)
        best = brute_lap(C)
        first = min(perm for perm in itertools.permutations(range(K)) if assignment_cost(C, perm) == best)
        assert solve_lap(C)[0] == first


def test_brute_force_align_examples(rng):
    p = rng.standard_normal((4, 2))
    G = GroupSpec.symmetric(4)
    r = brute_force_align(p, p, G)
    assert r.element == G.identity() and r.cost == 0.0
    g = G.random_element(rng)
    assert brute_force_align(p, apply(g, p), G).cost == 0.0


def test_align_symmetric_examples():
    r = align_symmetric(np.array([[1.0], [2.0], [3.0]]), np.array([[3.0], [1.0], [2.0]]))
    assert r.cost == 0.0
    r = align_symmetric(np.array([[0.0, 0.0], [2.0, 0.0]]), np.array([[2.1, 0.0], [0.1, 0.0]]))
    assert r.element.mapping == (1, 0)
    assert r.cost == pytest.approx(0.02, abs=1e-15)


def test_align_cyclic_examples(rng):
    p = rng.standard_normal((5, 1))
    g = GroupElement.shift(5, 1)
    r = align_cyclic(p, apply(g, p))
    assert r.cost == 0.0
    assert apply(r.element, apply(g, p)).tolist() == p.tolist()
    q = np.array([[0.0], [2.0], [1.0]])
    p = np.array([[0.0], [1.0], [2.0]])
    costs = [assignment_cost(cost_matrix(p, q), GroupElement.shift(3, s).mapping) for s in range(3)]
    r = align_cyclic(p, q)
    assert r.cost == min(costs) > 0
    assert r.element == GroupElement.shift(3, int(np.argmin(costs)))
    # ties go to the smallest shift
    assert align_cyclic(np.zeros((3, 1)), np.zeros((3, 1))).element == GroupElement.shift(3, 0)


def test_align_matches_brute_force_gaussian(rng):
    G = GroupSpec.symmetric(4)
    factor = GaussianManifold(2)
    for _ in range(30):
        p = tuple(GaussianComponent.from_covariance(rng.standard_normal(2), random_spd(rng, 2)) for _ in range(4))
        q = tuple(GaussianComponent.from_covariance(rng.standard_normal(2), random_spd(rng, 2)) for _ in range(4))
        assert align(p, q, G, factor).cost == brute_force_align(p, q, G, factor).cost


def test_quotient_distance_examples():
    G = GroupSpec.symmetric(2)
    p = np.array([[0.0], [5.0]])
    assert quotient_distance(p, p, G) == 0.0
    assert quotient_distance(np.array([[1.0], [2.0]]), np.array([[2.0], [1.0]]), G) == 0.0
    assert quotient_distance(p, np.array([[6.0], [1.0]]), G) == math.sqrt(2.0)


@pytest.mark.parametrize("G", [GroupSpec.symmetric(4), GroupSpec.cyclic(4), GroupSpec.trivial(4)])
def test_isometry_and_quotient_invariance(rng, G):
    P = ProductManifold(Euclidean(2), 4)
    for _ in range(200):
        p, q = rng.standard_normal((4, 2)), rng.standard_normal((4, 2))
        g, h = G.random_element(rng), G.random_element(rng)
        assert abs(P.dist(apply(g, p), apply(g, q)) - P.dist(p, q)) < 1e-12
        assert abs(quotient_distance(apply(g, p), apply(h, q), G) - quotient_distance(p, q, G)) < 1e-12


def test_quotient_distance_is_a_metric(rng):
    G = GroupSpec.symmetric(3)
    for _ in range(200):
        p, q, r = (rng.standard_normal((3, 1)) for _ in range(3))
        assert quotient_distance(p, r, G) <= quotient_distance(p, q, G) + quotient_distance(q, r, G) + 1e-12


def test_sort_align_1d(rng):
    p = np.array([0.0, 1.0, 2.0, 3.0])
    q = np.array([2.5, -1.0, 0.7, 9.0])
    r = sort_align_1d(p, q)
    assert list(apply(r.element, q)) == sorted(q)
    assert sort_align_1d(q, q).element == GroupElement.identity(4)
    for _ in range(300):
        K = int(rng.integers(2, 7))
        a, b = rng.standard_normal((K, 1)), rng.standard_normal((K, 1))
        assert sort_align_1d(a, b).cost == align_symmetric(a, b).cost
    with pytest.raises(ContractViolation):
        sort_align_1d(np.zeros((3, 2)), np.zeros((3, 2)))
