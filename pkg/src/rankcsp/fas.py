"""Local feedback-arc-set representation of a ranking CSP and FAST solvers.

Weights are exact rationals stored as an integer numerator matrix over a
single per-instance denominator.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations

import numpy as np

from .core import ConstraintSystem, Ranking, as_ordering, to_fraction
from .errors import DomainMismatchError, InstanceTooSmallError, PositionCollisionError, SizeCapError

EXACT_CAP = 20


@dataclass(frozen=True, eq=False)
class FasInstance:
    """Complete weighted digraph on ``verts``; arc weight ``w[u][v] = num[i, j] / denom``.

    ``w[u][v]`` is paid when u ends up after v.
    """

    verts: tuple
    num: np.ndarray
    denom: int = 1

    def __post_init__(self):
        verts = tuple(int(v) for v in self.verts)
        num = np.array(self.num, dtype=np.int64).reshape(len(verts), len(verts))
        if (num < 0).any():
            raise ValueError("FAS weights must be nonnegative")
        if num.diagonal().any():
            raise ValueError("FAS weights must have a zero diagonal")
        if self.denom <= 0:
            raise ValueError("denominator must be positive")
        num.setflags(write=False)
        object.__setattr__(self, "verts", verts)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "index", {v: i for i, v in enumerate(verts)})

    @classmethod
    def from_weights(cls, verts, weights) -> FasInstance:
        """Build from a nested sequence or dict-of-dicts of rationals."""
        verts = tuple(verts)
        m = len(verts)
        if isinstance(weights, dict):
            rows = [[to_fraction(weights.get(u, {}).get(v, 0)) for v in verts] for u in verts]
        else:
            rows = [[to_fraction(x) for x in row] for row in weights]
        denom = math.lcm(1, *(x.denominator for row in rows for x in row))
        num = [[int(x * denom) for x in row] for row in rows]
        return cls(verts, np.array(num, dtype=np.int64).reshape(m, m), denom)

    def __len__(self):
        return len(self.verts)

    def __eq__(self, other):
        if not isinstance(other, FasInstance):
            return NotImplemented
        return self.verts == other.verts and (
            self.num * other.denom == other.num * self.denom
        ).all()

    def w(self, u, v) -> Fraction:
        return Fraction(int(self.num[self.index[u], self.index[v]]), self.denom)

    def weights(self) -> dict:
        return {u: {v: self.w(u, v) for v in self.verts} for u in self.verts}

    def _indices(self, sigma) -> np.ndarray:
        order = sigma.order if isinstance(sigma, Ranking) else as_ordering(sigma).sequence
        if set(order) != set(self.verts) or len(order) != len(self.verts):
            raise DomainMismatchError("ordering domain differs from FAS vertex set")
        return np.array([self.index[v] for v in order], dtype=np.int64)


def derive_fas(c: ConstraintSystem, sigma) -> FasInstance:
    """Weights ``w[u][v]``: constraints on {u, v} ⊆ S ⊆ U violated when v is pulled just before u.

    If v already precedes u the ordering is left as is.
    """
    sigma = as_ordering(sigma)
    seq = sigma.sequence
    k = c.k
    if len(seq) < k:
        raise InstanceTooSmallError(f"need at least {k} vertices, got {len(seq)}")
    index = {v: i for i, v in enumerate(sorted(seq))}
    m = len(seq)
    num = np.zeros((m, m), dtype=np.int64)
    violated = c.violated
    for s in combinations(seq, k):
        here = violated(s)
        for a in range(k):
            for b in range(a + 1, k):
                u, v = s[a], s[b]
                # v after u: pull v to just before u
                pulled = s[:a] + (v,) + s[a:b] + s[b + 1:]
                if violated(pulled):
                    num[index[u], index[v]] += 1
                # u before v: unchanged
                if here:
                    num[index[v], index[u]] += 1
    return FasInstance(tuple(sorted(seq)), num, 1)


def cancellation_cap(m: int, k: int) -> Fraction:
    return Fraction(math.comb(m - 2, k - 2), 10 * 3 ** (k - 1))


def cancel_fas(f: FasInstance, k: int) -> FasInstance:
    """Subtract min(cap, w_uv, w_vu) from both arcs of every pair."""
    cap = cancellation_cap(len(f), k)
    denom = math.lcm(f.denom, cap.denominator)
    w = f.num * (denom // f.denom)
    cap_num = int(cap * denom)
    common = np.minimum(np.minimum(w, w.T), cap_num)
    return FasInstance(f.verts, w - common, denom)


def fas_cost(f: FasInstance, sigma) -> Fraction:
    idx = f._indices(sigma)
    sub = f.num[np.ix_(idx, idx)]
    # row i is later than column j below the diagonal
    return Fraction(int(np.tril(sub, -1).sum()), f.denom)


def fas_move_cost(f: FasInstance, sigma, v, p) -> Fraction:
    sigma = as_ordering(sigma)
    p = to_fraction(p)
    total = 0
    iv = f.index[v]
    for u, q in sigma.pos.items():
        if u == v:
            continue
        iu = f.index[u]
        if q > p:
            total += int(f.num[iu, iv])
        elif q < p:
            total += int(f.num[iv, iu])
        else:
            raise PositionCollisionError(f"position {p} is occupied by {u}")
    return Fraction(total, f.denom)


def solve_fas_exact(f: FasInstance, cap: int = EXACT_CAP) -> Ranking:
    """Optimal ranking by dynamic programming over vertex subsets.

    ``best[S] = min_v best[S - v] + sum_{u in S - v} w[v][u]`` with v placed last.
    Ties go to the smaller vertex id as the last element.
    """
    m = len(f)
    if m > cap:
        raise SizeCapError("exact FAS solver", m, cap)
    if m == 0:
        return Ranking(())
    size = 1 << m
    popcount = np.zeros(size, dtype=np.int64)
    for i in range(m):
        popcount[1 << i: 1 << (i + 1)] = popcount[: 1 << i] + 1
    layers = [np.flatnonzero(popcount == L) for L in range(m + 1)]
    best = np.full(size, np.iinfo(np.int64).max, dtype=np.int64)
    best[0] = 0
    last = np.full(size, -1, dtype=np.int8)
    # into[v][mask] = sum of w[v][u] over u in mask
    into = []
    for i in range(m):
        arr = np.zeros(1, dtype=np.int64)
        for j in range(m):
            arr = np.concatenate([arr, arr + f.num[i, j]])
        into.append(arr)
    for L in range(1, m + 1):
        masks = layers[L]
        for i in range(m):
            bit = 1 << i
            sel = masks[(masks & bit) != 0]
            prev = sel ^ bit
            val = best[prev] + into[i][prev]
            better = val < best[sel]
            best[sel[better]] = val[better]
            last[sel[better]] = i
    order = []
    mask = size - 1
    while mask:
        i = int(last[mask])
        order.append(f.verts[i])
        mask ^= 1 << i
    return Ranking(tuple(reversed(order)))


def _slot_costs(num, order, i):
    """Cost of vertex index ``i`` at each slot of ``order`` (which excludes i)."""
    before = num[i, order]  # paid when an element precedes i
    after = num[order, i]   # paid when an element follows i
    prefix = np.concatenate([[0], np.cumsum(before)])
    suffix = np.concatenate([np.cumsum(after[::-1])[::-1], [0]])
    return prefix + suffix


def solve_fas_local(f: FasInstance, start: Ranking, max_passes: int = 10_000):
    """Best-improvement single-vertex moves.

    Each pass scans (vertex id, target slot) in lexicographic order and applies
    the strictly best improving move.  Returns ``(ranking, certified)`` where
    ``certified`` means no improving move is left.
    """
    order = list(f._indices(start))
    num = f.num
    for _ in range(max_passes):
        best_gain, best_move = 0, None
        for i in range(len(order)):
            at = order.index(i)
            rest = order[:at] + order[at + 1:]
            costs = _slot_costs(num, np.array(rest, dtype=np.int64), i)
            slot = int(np.argmin(costs))
            gain = int(costs[at] - costs[slot])
            if gain > best_gain:
                best_gain, best_move = gain, (i, slot)
        if best_move is None:
            return Ranking(tuple(f.verts[i] for i in order)), True
        i, slot = best_move
        order.remove(i)
        order.insert(slot, i)
    certified = not has_improving_move(f, Ranking(tuple(f.verts[i] for i in order)))
    return Ranking(tuple(f.verts[i] for i in order)), certified


def has_improving_move(f: FasInstance, ranking: Ranking) -> bool:
    order = list(f._indices(ranking))
    for at, i in enumerate(order):
        rest = np.array(order[:at] + order[at + 1:], dtype=np.int64)
        costs = _slot_costs(f.num, rest, i)
        if costs.min() < costs[at]:
            return True
    return False


def solve_fas_pivot(f: FasInstance, seed: int = 0) -> Ranking:
    """Randomized pivoting: u goes left of pivot v iff w_uv >= w_vu."""
    rng = random.Random(seed)
    num = f.num

    def sort(items):
        if len(items) <= 1:
            return items
        pivot = items[rng.randrange(len(items))]
        left, right = [], []
        for u in items:
            if u == pivot:
                continue
            (left if num[u, pivot] >= num[pivot, u] else right).append(u)
        return sort(left) + [pivot] + sort(right)

    order = sort(list(range(len(f))))
    return Ranking(tuple(f.verts[i] for i in order))


def pair_sum_bounds(f: FasInstance):
    """Smallest and largest ``w_uv + w_vu`` over unordered pairs, or None if fewer than 2 vertices."""
    if len(f) < 2:
        return None
    sums = f.num + f.num.T
    iu = np.triu_indices(len(f), 1)
    vals = sums[iu]
    return Fraction(int(vals.min()), f.denom), Fraction(int(vals.max()), f.denom)
