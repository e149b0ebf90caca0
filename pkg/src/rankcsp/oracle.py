"""Exact optimum for small instances: branch and bound, plus plain enumeration."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, permutations

from .core import ConstraintSystem, Ranking, cost
from .errors import SizeCapError
from .search import csp_local_search, pivot_baseline

EXACT_OPT_CAP = 10
ENUMERATE_CAP = 8


@dataclass(frozen=True)
class OracleResult:
    opt_cost: int
    witness: Ranking
    explored: int


def exact_opt(c: ConstraintSystem, cap_n: int = EXACT_OPT_CAP, seed: int = 0) -> OracleResult:
    """Depth-first branch and bound over prefixes, extending with vertices in id order.

    The bound counts violated constraints lying entirely inside the prefix; it
    can only grow as the prefix extends, so pruning is safe.  Pruning is
    strict-improvement only, so the witness is the lexicographically smallest
    optimal order.  A local-search ranking supplies the initial bound only; it
    is never returned as the witness.
    """
    n, k = c.n, c.k
    if n > cap_n:
        raise SizeCapError("exact_opt", n, cap_n)
    if n < k:
        return OracleResult(0, Ranking(tuple(range(n))), 1)
    violated = c.violated
    best_cost = cost(c, csp_local_search(c, pivot_baseline(c, seed))) + 1
    best_order = None
    explored = 0
    prefix = []
    used = [False] * n

    def extend(bound):
        nonlocal best_cost, best_order, explored
        explored += 1
        if len(prefix) == n:
            if bound < best_cost:
                best_cost, best_order = bound, tuple(prefix)
            return
        for x in range(n):
            if used[x]:
                continue
            added = 0
            if len(prefix) >= k - 1:
                for q in combinations(prefix, k - 1):
                    added += violated(q + (x,))
                    if bound + added >= best_cost:
                        break
            if bound + added >= best_cost:
                continue
            used[x] = True
            prefix.append(x)
            extend(bound + added)
            prefix.pop()
            used[x] = False

    extend(0)
    return OracleResult(best_cost, Ranking(best_order), explored)


def enumerate_opt(c: ConstraintSystem, cap_n: int = ENUMERATE_CAP) -> OracleResult:
    """Evaluate all n! rankings; the first minimum in lexicographic order wins."""
    if c.n > cap_n:
        raise SizeCapError("enumerate_opt", c.n, cap_n)
    best, witness, explored = None, None, 0
    for order in permutations(range(c.n)):
        explored += 1
        value = cost(c, Ranking(order))
        if best is None or value < best:
            best, witness = value, order
    return OracleResult(best, Ranking(witness), explored)
