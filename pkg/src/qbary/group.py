"""Finite group actions on K-tuples and alignment in the quotient.

A group element acts on a tuple by reindexing: factor ``i`` of ``g . p`` is
factor ``g(i)`` of ``p``. Aligning ``q`` to ``p`` means finding the element
``s`` minimizing ``sum_i d(p_i, q_s(i))^2``; the square root of that minimum
is the quotient distance between the orbits of ``p`` and ``q``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterator, Sequence

import numpy as np

from .errors import ContractViolation, EnumerationTooLarge
from .manifold import Euclidean, Manifold

ENUMERATION_LIMIT = 5040


class GroupKind(str, Enum):
    SYMMETRIC = "sym"
    CYCLIC = "cyc"
    TRIVIAL = "none"


@dataclass(frozen=True)
class GroupElement:
    mapping: tuple

    def __post_init__(self):
        if sorted(self.mapping) != list(range(len(self.mapping))):
            raise ContractViolation(f"mapping {self.mapping} is not a permutation")

    @classmethod
    def identity(cls, K):
        return cls(tuple(range(K)))

    @classmethod
    def shift(cls, K, s):
        return cls(tuple((i + s) % K for i in range(K)))

    @property
    def degree(self):
        return len(self.mapping)

    def __mul__(self, other):
        # apply(g * h, p) == apply(g, apply(h, p))
        return GroupElement(tuple(other.mapping[i] for i in self.mapping))

    def inverse(self):
        inv = [0] * self.degree
        for i, m in enumerate(self.mapping):
            inv[m] = i
        return GroupElement(tuple(inv))


@dataclass(frozen=True)
class GroupSpec:
    kind: GroupKind
    degree: int

    def __post_init__(self):
        object.__setattr__(self, "kind", GroupKind(self.kind))
        if self.degree < 1:
            raise ContractViolation(f"group degree must be >= 1, got {self.degree}")

    @classmethod
    def symmetric(cls, K):
        return cls(GroupKind.SYMMETRIC, K)

    @classmethod
    def cyclic(cls, K):
        return cls(GroupKind.CYCLIC, K)

    @classmethod
    def trivial(cls, K):
        return cls(GroupKind.TRIVIAL, K)

    @property
    def order(self) -> int:
        if self.kind is GroupKind.SYMMETRIC:
            return math.factorial(self.degree)
        if self.kind is GroupKind.CYCLIC:
            return self.degree
        return 1

    def identity(self):
        return GroupElement.identity(self.degree)

    def elements(self) -> Iterator[GroupElement]:
        """All elements, in lexicographic order of their mappings."""
        if self.order > ENUMERATION_LIMIT:
            raise EnumerationTooLarge(
                f"|G| = {self.order} exceeds the enumeration limit {ENUMERATION_LIMIT}; use alignment instead"
            )
        K = self.degree
        if self.kind is GroupKind.SYMMETRIC:
            return (GroupElement(m) for m in itertools.permutations(range(K)))
        if self.kind is GroupKind.CYCLIC:
            return (GroupElement.shift(K, s) for s in range(K))
        return iter([self.identity()])

    def random_element(self, rng: np.random.Generator) -> GroupElement:
        K = self.degree
        if self.kind is GroupKind.SYMMETRIC:
            return GroupElement(tuple(int(i) for i in rng.permutation(K)))
        if self.kind is GroupKind.CYCLIC:
            return GroupElement.shift(K, int(rng.integers(K)))
        return self.identity()

    def contains(self, g: GroupElement) -> bool:
        if g.degree != self.degree:
            return False
        if self.kind is GroupKind.SYMMETRIC:
            return True
        if self.kind is GroupKind.CYCLIC:
            return g == GroupElement.shift(self.degree, g.mapping[0])
        return g == self.identity()


@dataclass(frozen=True)
class AlignmentResult:
    element: GroupElement
    cost: float


def apply(g: GroupElement, p):
    """Reindex the factors of ``p``: ``result[i] = p[g(i)]``."""
    if len(p) != g.degree:
        raise ContractViolation(f"element of degree {g.degree} applied to a {len(p)}-tuple")
    if isinstance(p, np.ndarray):
        return p[list(g.mapping)]
    return tuple(p[i] for i in g.mapping)


def orbit(p, G: GroupSpec) -> list:
    return [apply(g, p) for g in G.elements()]


def infer_factor(p) -> Manifold:
    """Guess the factor manifold of a product point from its contents."""
    from .bures import GaussianComponent, GaussianManifold

    first = p[0]
    if isinstance(first, GaussianComponent):
        return GaussianManifold(first.dim)
    return Euclidean(np.atleast_1d(np.asarray(first)).shape[0])


def cost_matrix(p, q, factor: Manifold | None = None) -> np.ndarray:
    if len(p) != len(q):
        raise ContractViolation(f"tuples of different length: {len(p)} vs {len(q)}")
    factor = factor or infer_factor(p)
    return factor.pairwise_dist_sq(p, q)


def assignment_cost(cost, mapping: Sequence[int]) -> float:
    """``sum_i cost[i, mapping[i]]``, accumulated left to right."""
    total = 0.0
    for i, j in enumerate(mapping):
        total += float(cost[i, j])
    return total


def _hungarian(C):
    """O(n^3) shortest augmenting path with potentials; returns (row->col, u, v)."""
    n = len(C)
    inf = math.inf
    u = [0.0] * (n + 1)
    v = [0.0] * (n + 1)
    match = [0] * (n + 1)  # match[col] = row, 1-based, 0 = free
    way = [0] * (n + 1)
    for i in range(1, n + 1):
        match[0] = i
        j0 = 0
        minv = [inf] * (n + 1)
        used = [False] * (n + 1)
        while True:
            used[j0] = True
            i0 = match[j0]
            delta = inf
            j1 = 0
            row = C[i0 - 1]
            for j in range(1, n + 1):
                if not used[j]:
                    cur = row[j - 1] - u[i0] - v[j]
                    if cur < minv[j]:
                        minv[j] = cur
                        way[j] = j0
                    if minv[j] < delta:
                        delta = minv[j]
                        j1 = j
            for j in range(n + 1):
                if used[j]:
                    u[match[j]] += delta
                    v[j] -= delta
                else:
                    minv[j] -= delta
            j0 = j1
            if match[j0] == 0:
                break
        while j0:
            j1 = way[j0]
            match[j0] = match[j1]
            j0 = j1
    assign = [0] * n
    for j in range(1, n + 1):
        assign[match[j] - 1] = j - 1
    return assign, u[1:], v[1:]


def _lexicographic_matching(allowed):
    """Lexicographically smallest perfect matching in a boolean bipartite graph, or None."""
    n = len(allowed)

    def completable(row, taken):
        # Kuhn's augmenting paths on rows >= row with columns not in taken.
        owner = {}

        def augment(r, seen):
            for c in range(n):
                if allowed[r][c] and c not in taken and c not in seen:
                    seen.add(c)
                    if c not in owner or augment(owner[c], seen):
                        owner[c] = r
                        return True
            return False

        return all(augment(r, set()) for r in range(row, n))

    taken: set = set()
    result = []
    for i in range(n):
        for j in range(n):
            if allowed[i][j] and j not in taken and completable(i + 1, taken | {j}):
                result.append(j)
                taken.add(j)
                break
        else:
            return None
    return result


def solve_lap(cost) -> tuple[tuple, float]:
    """Minimum-cost perfect assignment of rows to columns.

    Returns ``(mapping, total)`` with ``mapping[i]`` the column assigned to row
    ``i``. Among optimal assignments the lexicographically smallest mapping is
    returned.
    """
    C = np.asarray(cost, dtype=float)
    if C.ndim != 2 or C.shape[0] != C.shape[1]:
        raise ContractViolation(f"cost matrix must be square, got shape {C.shape}")
    if not np.all(np.isfinite(C)):
        raise ContractViolation("cost matrix has NaN or infinite entries")
    n = len(C)
    if n == 0:
        return (), 0.0
    rows = C.tolist()
    assign, u, v = _hungarian(rows)
    best = assignment_cost(C, assign)
    tol = 1e-11 * max(1.0, float(np.abs(C).max()))
    tight = [[rows[i][j] - u[i] - v[j] <= tol for j in range(n)] for i in range(n)]
    lex = _lexicographic_matching(tight)
    if lex is not None and lex != assign:
        lex_cost = assignment_cost(C, lex)
        if lex_cost <= best:
            assign, best = lex, lex_cost
    return tuple(assign), best


def brute_force_align(p, q, G: GroupSpec, factor: Manifold | None = None) -> AlignmentResult:
    """Exhaustive minimization over all of G; ties go to the smallest mapping."""
    C = cost_matrix(p, q, factor)
    best = None
    for g in G.elements():
        c = assignment_cost(C, g.mapping)
        if best is None or c < best.cost:
            best = AlignmentResult(g, c)
    return best


def align_symmetric(p, q, factor: Manifold | None = None) -> AlignmentResult:
    mapping, total = solve_lap(cost_matrix(p, q, factor))
    return AlignmentResult(GroupElement(mapping), total)


def align_cyclic(p, q, factor: Manifold | None = None) -> AlignmentResult:
    C = cost_matrix(p, q, factor)
    K = len(C)
    best = None
    for s in range(K):
        g = GroupElement.shift(K, s)
        c = assignment_cost(C, g.mapping)
        if best is None or c < best.cost:
            best = AlignmentResult(g, c)
    return best


def align(p, q, G: GroupSpec, factor: Manifold | None = None) -> AlignmentResult:
    """Best element of G for matching ``q`` onto ``p``."""
    if len(p) != G.degree or len(q) != G.degree:
        raise ContractViolation(f"group of degree {G.degree} used on tuples of length {len(p)}, {len(q)}")
    if G.kind is GroupKind.SYMMETRIC:
        return align_symmetric(p, q, factor)
    if G.kind is GroupKind.CYCLIC:
        return align_cyclic(p, q, factor)
    C = cost_matrix(p, q, factor)
    g = G.identity()
    return AlignmentResult(g, assignment_cost(C, g.mapping))


def quotient_distance(p, q, G: GroupSpec, factor: Manifold | None = None) -> float:
    return math.sqrt(align(p, q, G, factor).cost)


def sort_align_1d(p, q) -> AlignmentResult:
    """Symmetric-group alignment of scalar tuples by matching sorted orders."""
    p_arr = np.asarray(p, dtype=float)
    q_arr = np.asarray(q, dtype=float)
    for name, arr in (("p", p_arr), ("q", q_arr)):
        if not (arr.ndim == 1 or (arr.ndim == 2 and arr.shape[1] == 1)):
            raise ContractViolation(f"{name} must hold one scalar per factor, got shape {arr.shape}")
    p_flat, q_flat = p_arr.reshape(-1), q_arr.reshape(-1)
    if len(p_flat) != len(q_flat):
        raise ContractViolation(f"tuples of different length: {len(p_flat)} vs {len(q_flat)}")
    mapping = [0] * len(p_flat)
    for i, j in zip(np.argsort(p_flat, kind="stable"), np.argsort(q_flat, kind="stable")):
        mapping[i] = int(j)
    C = Euclidean(1).pairwise_dist_sq(p_flat, q_flat)
    return AlignmentResult(GroupElement(tuple(mapping)), assignment_cost(C, mapping))
