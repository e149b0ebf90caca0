"""Rankings, orderings, constraint systems and the cost engine.

Vertex ids are 0-based integers.  Positions are exact rationals
(:class:`fractions.Fraction`), so orderings never suffer from float ties.
"""

from __future__ import annotations

import math
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from itertools import combinations, permutations
from typing import Iterable, Mapping, NamedTuple, Sequence

from .errors import DomainMismatchError, MalformedInstanceError, PositionCollisionError

BETWEENNESS = "betweenness"
KFAST = "kfast"
KBETWEENNESS = "kbetweenness"
TABLE = "table"
FAMILIES = (BETWEENNESS, KFAST, KBETWEENNESS, TABLE)

MAX_TABLE_ARITY = 4

_PERM_INDEX = {
    k: {perm: i for i, perm in enumerate(permutations(range(k)))}
    for k in range(2, MAX_TABLE_ARITY + 1)
}


def to_fraction(x) -> Fraction:
    """Exact rational from an int, Fraction, string or float (floats go through ``str``)."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        return Fraction(str(x))
    return Fraction(x)


@dataclass(frozen=True)
class Ranking:
    """Bijection from a vertex subset onto 1..m, stored as the vertices in rank order."""

    order: tuple

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(int(v) for v in self.order))
        if len(set(self.order)) != len(self.order):
            raise MalformedInstanceError(f"ranking repeats a vertex: {self.order}")

    @classmethod
    def from_ranks(cls, ranks: Mapping[int, int]) -> Ranking:
        order = sorted(ranks, key=ranks.__getitem__)
        if sorted(ranks.values()) != list(range(1, len(ranks) + 1)):
            raise MalformedInstanceError("ranks must use 1..m exactly once")
        return cls(tuple(order))

    @cached_property
    def rank(self) -> dict:
        return {v: i + 1 for i, v in enumerate(self.order)}

    @property
    def domain(self) -> frozenset:
        return frozenset(self.order)

    def __len__(self):
        return len(self.order)

    def __iter__(self):
        return iter(self.order)

    def reversed(self) -> Ranking:
        return Ranking(self.order[::-1])

    def restrict(self, vertices: Iterable[int]) -> Ranking:
        keep = set(vertices)
        return Ranking(tuple(v for v in self.order if v in keep))

    def as_ordering(self) -> Ordering:
        return Ordering({v: Fraction(i + 1) for i, v in enumerate(self.order)})


@dataclass(frozen=True)
class Ordering:
    """Injection from a vertex subset into the rationals."""

    pos: Mapping[int, Fraction] = field(default_factory=dict)

    def __post_init__(self):
        pos = {int(v): to_fraction(p) for v, p in dict(self.pos).items()}
        if len(set(pos.values())) != len(pos):
            raise PositionCollisionError("ordering is not injective")
        object.__setattr__(self, "pos", pos)

    def __getitem__(self, v):
        return self.pos[v]

    def __contains__(self, v):
        return v in self.pos

    def __len__(self):
        return len(self.pos)

    @property
    def domain(self) -> frozenset:
        return frozenset(self.pos)

    @cached_property
    def sequence(self) -> tuple:
        """Vertices in ascending position."""
        return tuple(sorted(self.pos, key=self.pos.__getitem__))

    def restrict(self, vertices: Iterable[int]) -> Ordering:
        return Ordering({v: self.pos[v] for v in vertices})

    def place(self, v: int, p) -> Ordering:
        """Return ``self`` restricted to the other vertices, plus ``v -> p``."""
        p = to_fraction(p)
        pos = {u: q for u, q in self.pos.items() if u != v}
        if p in pos.values():
            raise PositionCollisionError(f"position {p} already taken")
        pos[v] = p
        return Ordering(pos)

    def ranking(self) -> Ranking:
        return Ranking(self.sequence)


def as_ordering(x) -> Ordering:
    if isinstance(x, Ordering):
        return x
    if isinstance(x, Ranking):
        return x.as_ordering()
    if isinstance(x, Mapping):
        return Ordering(x)
    raise TypeError(f"cannot interpret {type(x).__name__} as an ordering")


def _sequence(x) -> tuple:
    if isinstance(x, Ranking):
        return x.order
    return as_ordering(x).sequence


@dataclass(frozen=True)
class ConstraintSystem:
    """Fully dense arity-k constraint system over vertices 0..n-1.

    ``payload`` maps every sorted k-tuple of vertices to family data:

    * ``betweenness`` (k=3): the vertex that must sit in the middle
    * ``kfast``: the single satisfying order, as a k-tuple
    * ``kbetweenness`` (k>=4): the sorted pair that must occupy both ends
    * ``table`` (k<=4): k! violation bits, permutations of the sorted subset
      taken in lexicographic order
    """

    n: int
    k: int
    family: str
    payload: Mapping[tuple, object] = field(repr=False)

    def __post_init__(self):
        n, k, family = self.n, self.k, self.family
        if family not in FAMILIES:
            raise MalformedInstanceError(f"unknown family {family!r}")
        if k < 2 or n < 0:
            raise MalformedInstanceError(f"bad sizes n={n}, k={k}")
        if family == BETWEENNESS and k != 3:
            raise MalformedInstanceError("betweenness constraints have arity 3")
        if family == KBETWEENNESS and k < 4:
            raise MalformedInstanceError("kbetweenness needs k >= 4")
        if family == TABLE and k > MAX_TABLE_ARITY:
            raise MalformedInstanceError(f"table family limited to k <= {MAX_TABLE_ARITY}")
        payload = {}
        for s, d in dict(self.payload).items():
            s = tuple(s)
            if len(s) != k or list(s) != sorted(set(s)) or s[0] < 0 or s[-1] >= n:
                raise MalformedInstanceError(f"bad constraint subset {s}")
            payload[s] = _normalize_payload(family, k, s, d)
        expected = math.comb(n, k)
        if len(payload) != expected:
            raise MalformedInstanceError(
                f"expected {expected} constraints, found {len(payload)}"
            )
        object.__setattr__(self, "payload", payload)

    @property
    def vertices(self) -> range:
        return range(self.n)

    def violated(self, order: Sequence[int]) -> int:
        """1 if the constraint on ``set(order)`` is unsatisfied by ``order``, else 0."""
        key = tuple(sorted(order))
        try:
            d = self.payload[key]
        except KeyError:
            raise MalformedInstanceError(f"no constraint on subset {key}") from None
        family = self.family
        if family == BETWEENNESS:
            return int(order[1] != d)
        if family == KFAST:
            return int(tuple(order) != d)
        if family == KBETWEENNESS:
            a, b = d
            first, last = order[0], order[-1]
            return int(not ((first == a and last == b) or (first == b and last == a)))
        index = _PERM_INDEX[self.k][tuple(key.index(v) for v in order)]
        return d[index]


def _normalize_payload(family, k, s, d):
    members = set(s)
    if family == BETWEENNESS:
        if d not in members:
            raise MalformedInstanceError(f"designated vertex {d} outside {s}")
        return int(d)
    if family == KFAST:
        d = tuple(int(v) for v in d)
        if sorted(d) != list(s):
            raise MalformedInstanceError(f"kfast order {d} is not a permutation of {s}")
        return d
    if family == KBETWEENNESS:
        d = tuple(sorted(int(v) for v in d))
        if len(d) != 2 or d[0] == d[1] or not set(d) <= members:
            raise MalformedInstanceError(f"kbetweenness endpoints {d} invalid for {s}")
        return d
    d = tuple(int(b) for b in d)
    if len(d) != math.factorial(k) or not set(d) <= {0, 1}:
        raise MalformedInstanceError(f"table for {s} must hold {math.factorial(k)} bits")
    return d


class CostStats(NamedTuple):
    total: int
    per_vertex: dict


class CrossingStats(NamedTuple):
    left_to_right: int
    right_to_left: int
    net_flow: int


def evaluate(c: ConstraintSystem, ranking) -> int:
    """Violation indicator of the constraint on the vertices of ``ranking``."""
    order = _sequence(ranking) if not isinstance(ranking, (tuple, list)) else tuple(ranking)
    if len(order) != c.k:
        raise MalformedInstanceError(f"need {c.k} vertices, got {len(order)}")
    return c.violated(order)


def cost(c: ConstraintSystem, sigma) -> int:
    """Number of violated constraints among the vertices ordered by ``sigma``."""
    seq = _sequence(sigma)
    violated = c.violated
    # combinations() keeps input order, so every subset is already sorted by position
    return sum(violated(s) for s in combinations(seq, c.k))


def cost_stats(c: ConstraintSystem, sigma) -> CostStats:
    seq = _sequence(sigma)
    per_vertex = dict.fromkeys(seq, 0)
    total = 0
    for s in combinations(seq, c.k):
        if c.violated(s):
            total += 1
            for v in s:
                per_vertex[v] += 1
    return CostStats(total, per_vertex)


def move_cost(c: ConstraintSystem, sigma, v: int, p) -> int:
    """Cost of the constraints containing ``v`` once ``v`` is moved to position ``p``.

    Direct enumeration over every (k-1)-subset of the other vertices.
    """
    sigma = as_ordering(sigma)
    p = to_fraction(p)
    others = [u for u in sigma.sequence if u != v]
    positions = [sigma.pos[u] for u in others]
    if p in positions:
        raise PositionCollisionError(f"position {p} is occupied")
    index = dict(zip(others, positions))
    total = 0
    for q in combinations(others, c.k - 1):
        below = sum(1 for u in q if index[u] < p)
        total += c.violated(q[:below] + (v,) + q[below:])
    return total


def move_cost_profile(c: ConstraintSystem, sigma, v: int) -> list:
    """``b(sigma, v, .)`` at every insertion gap of the other vertices.

    Entry ``g`` is the cost with ``v`` placed after exactly ``g`` of the other
    vertices.  Each (k-1)-subset is evaluated once per gap it can distinguish.
    """
    seq = [u for u in _sequence(sigma) if u != v]
    m = len(seq)
    k = c.k
    diff = [0] * (m + 2)
    rank = {u: i for i, u in enumerate(seq)}
    violated = c.violated
    for q in combinations(seq, k - 1):
        lo = 0
        for j in range(k):
            hi = rank[q[j]] if j < k - 1 else m
            if violated(q[:j] + (v,) + q[j:]):
                diff[lo] += 1
                diff[hi + 1] -= 1
            lo = hi + 1
    out, run = [], 0
    for g in range(m + 1):
        run += diff[g]
        out.append(run)
    return out


def gap_index(sigma, v: int, p) -> int:
    """Number of vertices other than ``v`` positioned strictly below ``p``."""
    sigma = as_ordering(sigma)
    p = to_fraction(p)
    positions = sorted(q for u, q in sigma.pos.items() if u != v)
    i = bisect_left(positions, p)
    if i < len(positions) and positions[i] == p:
        raise PositionCollisionError(f"position {p} is occupied")
    return i


def ranking_of(sigma) -> Ranking:
    if isinstance(sigma, Ranking):
        return sigma
    return as_ordering(sigma).ranking()


def position_grid(u: int, n: int, eps) -> list:
    eps = to_fraction(eps)
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    step = eps * n
    offset = Fraction(u, n + 1)
    return [j * step + offset for j in range(math.floor(1 / eps) + 1)]


def round_ordering(pi: Ranking, eps, n: int) -> Ordering:
    """Bucketed ordering: each rank rounded down to a multiple of eps*n, plus u/(n+1)."""
    eps = to_fraction(eps)
    if not 0 < eps <= 1:
        raise ValueError("eps must lie in (0, 1]")
    step = eps * n
    return Ordering(
        {u: step * math.floor(r / step) + Fraction(u, n + 1) for u, r in pi.rank.items()}
    )


def _check_same_domain(a: Ordering, b: Ordering):
    if a.domain != b.domain:
        raise DomainMismatchError("orderings have different domains")


def kendall_tau(sigma, sigma_prime) -> int:
    """Number of vertex pairs ordered differently; merge-sort inversion count."""
    a, b = as_ordering(sigma), as_ordering(sigma_prime)
    _check_same_domain(a, b)
    values = [b.pos[u] for u in a.sequence]
    return _count_inversions(values)[1]


def _count_inversions(xs):
    if len(xs) <= 1:
        return list(xs), 0
    mid = len(xs) // 2
    left, inv_l = _count_inversions(xs[:mid])
    right, inv_r = _count_inversions(xs[mid:])
    merged, inv = [], inv_l + inv_r
    i = j = 0
    while i < len(left) and j < len(right):
        if left[i] <= right[j]:
            merged.append(left[i])
            i += 1
        else:
            merged.append(right[j])
            inv += len(left) - i
            j += 1
    merged.extend(left[i:])
    merged.extend(right[j:])
    return merged, inv


def kendall_tau_naive(sigma, sigma_prime) -> int:
    a, b = as_ordering(sigma), as_ordering(sigma_prime)
    _check_same_domain(a, b)
    return sum(
        1
        for u, v in combinations(sorted(a.domain), 2)
        if (a.pos[u] < a.pos[v]) != (b.pos[u] < b.pos[v])
    )


def crossing_stats(sigma, p, sigma_prime, p_prime) -> CrossingStats:
    a, b = as_ordering(sigma), as_ordering(sigma_prime)
    _check_same_domain(a, b)
    p, p_prime = to_fraction(p), to_fraction(p_prime)
    ltr = sum(1 for v in a.pos if a.pos[v] < p and b.pos[v] > p_prime)
    rtl = sum(1 for v in a.pos if a.pos[v] > p and b.pos[v] < p_prime)
    net = sum(1 for v in b.pos if b.pos[v] > p_prime) - sum(1 for v in a.pos if a.pos[v] > p)
    return CrossingStats(ltr, rtl, net)


def _single_moves(order, mode, k):
    """Yield every order reachable by one allowed single-vertex move."""
    seen = set()
    if mode == "fragile":
        for i, v in enumerate(order):
            rest = order[:i] + order[i + 1:]
            for j in range(k):
                moved = rest[:j] + (v,) + rest[j:]
                if moved != order and moved not in seen:
                    seen.add(moved)
                    yield moved
    elif mode == "weak":
        half = Fraction(1, 2)
        for rank, p in ((1, 2 + half), (1, k + half), (k, k - 1 - half), (k, half)):
            v = order[rank - 1]
            rest = order[:rank - 1] + order[rank:]
            ranks = [r for r in range(1, k + 1) if r != rank]
            j = sum(1 for r in ranks if r < p)
            moved = rest[:j] + (v,) + rest[j:]
            if moved != order and moved not in seen:
                seen.add(moved)
                yield moved
    else:
        raise ValueError(f"unknown fragility mode {mode!r}")


def fragility_counterexample(c: ConstraintSystem, subset, mode: str = "fragile"):
    """Two orders of ``subset`` that both satisfy c and differ by an allowed move, or None."""
    subset = tuple(sorted(subset))
    if len(subset) != c.k:
        raise MalformedInstanceError(f"need {c.k} vertices, got {len(subset)}")
    for order in permutations(subset):
        if c.violated(order):
            continue
        for moved in _single_moves(order, mode, c.k):
            if not c.violated(moved):
                return order, moved
    return None


def check_fragility(c: ConstraintSystem, subset, mode: str = "fragile") -> bool:
    return fragility_counterexample(c, subset, mode) is None
