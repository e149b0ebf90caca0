"""Heuristic rankings for whole constraint systems."""

from __future__ import annotations

from .core import ConstraintSystem, Ranking, move_cost_profile
from .fas import derive_fas, solve_fas_pivot


def csp_local_search(c: ConstraintSystem, start: Ranking, max_passes: int = 10_000) -> Ranking:
    """Sweep vertices in id order, moving each to its cheapest gap when strictly better."""
    order = list(start.order)
    for _ in range(max_passes):
        moved = False
        for v in sorted(order):
            at = order.index(v)
            profile = move_cost_profile(c, Ranking(tuple(order)), v)
            slot = min(range(len(profile)), key=profile.__getitem__)
            if profile[slot] < profile[at]:
                order.remove(v)
                order.insert(slot, v)
                moved = True
        if not moved:
            break
    return Ranking(tuple(order))


def pivot_baseline(c: ConstraintSystem, seed: int = 0) -> Ranking:
    """Randomized pivoting on the local FAS instance of the id-order ranking."""
    identity = Ranking(tuple(range(c.n)))
    if c.n < c.k:
        return identity
    return solve_fas_pivot(derive_fas(c, identity), seed)
