import math
import random
from fractions import Fraction
from itertools import combinations, permutations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import brute
from helpers import random_ordering, random_ranking
from rankcsp.core import (
    ConstraintSystem,
    Ordering,
    Ranking,
    check_fragility,
    cost,
    cost_stats,
    crossing_stats,
    evaluate,
    gap_index,
    kendall_tau,
    kendall_tau_naive,
    move_cost,
    move_cost_profile,
    position_grid,
    ranking_of,
    round_ordering,
)
from rankcsp.errors import DomainMismatchError, MalformedInstanceError, PositionCollisionError
from rankcsp.instances import gen_planted, random_system

SINGLE = ConstraintSystem(3, 3, "betweenness", {(0, 1, 2): 1})

families = st.sampled_from(
    [("betweenness", 3), ("kfast", 2), ("kfast", 3), ("kfast", 4), ("kbetweenness", 4), ("table", 3)]
)


# --- evaluate -------------------------------------------------------------

def test_evaluate_designated_middle_is_satisfied():
    assert evaluate(SINGLE, (0, 1, 2)) == 0


def test_evaluate_designated_end_is_violated():
    c = ConstraintSystem(3, 3, "betweenness", {(0, 1, 2): 0})
    assert evaluate(c, (0, 1, 2)) == 1


def test_evaluate_kbetweenness_endpoints():
    c = ConstraintSystem(4, 4, "kbetweenness", {(0, 1, 2, 3): (0, 3)})
    assert evaluate(c, (0, 1, 2, 3)) == 0
    assert evaluate(c, (1, 0, 2, 3)) == 1
    assert evaluate(c, Ranking((3, 2, 1, 0))) == 0


def test_evaluate_table_uses_lexicographic_permutation_order():
    bits = [1] * 6
    bits[list(permutations((0, 1, 2))).index((2, 0, 1))] = 0
    c = ConstraintSystem(3, 3, "table", {(0, 1, 2): bits})
    assert evaluate(c, (2, 0, 1)) == 0
    assert sum(evaluate(c, p) for p in permutations((0, 1, 2))) == 5


def test_evaluate_unknown_subset_is_malformed():
    with pytest.raises(MalformedInstanceError):
        SINGLE.violated((0, 1, 5))


def test_constraint_system_rejects_missing_and_foreign_payloads():
    with pytest.raises(MalformedInstanceError):
        ConstraintSystem(4, 3, "betweenness", {(0, 1, 2): 1})
    with pytest.raises(MalformedInstanceError):
        ConstraintSystem(3, 3, "betweenness", {(0, 1, 2): 7})
    with pytest.raises(MalformedInstanceError):
        ConstraintSystem(5, 5, "table", {(0, 1, 2, 3, 4): [0] * 120})


@given(seed=st.integers(0, 10**6), fam=families)
@settings(max_examples=60, deadline=None)
def test_evaluate_matches_payload_semantics(seed, fam):
    family, k = fam
    rng = random.Random(seed)
    c = random_system(family, k + 2, k, seed)
    s = rng.choice(sorted(c.payload))
    order = list(s)
    rng.shuffle(order)
    assert evaluate(c, tuple(order)) == brute.violated(c, tuple(order))


# --- cost -------------------------------------------------------------------

def test_cost_zero_at_planted_and_reversal():
    inst = gen_planted("betweenness", 8, 3, 0, seed=4)
    assert cost(inst.system, inst.planted) == 0
    assert cost(inst.system, inst.planted.reversed()) == 0


def test_cost_single_constraint_designated_first():
    assert cost(SINGLE, Ranking((1, 0, 2))) == 1


@given(seed=st.integers(0, 10**6), fam=families)
@settings(max_examples=40, deadline=None)
def test_cost_depends_only_on_ranking(seed, fam):
    family, k = fam
    rng = random.Random(seed)
    c = random_system(family, 7, k, seed)
    sigma = random_ordering(range(7), rng)
    assert cost(c, sigma) == cost(c, ranking_of(sigma)) == brute.cost(c, sigma.pos)


@given(seed=st.integers(0, 10**6))
@settings(max_examples=40, deadline=None)
def test_betweenness_cost_is_reversal_invariant(seed):
    rng = random.Random(seed)
    c = random_system("betweenness", 8, 3, seed)
    pi = random_ranking(range(8), rng)
    assert cost(c, pi) == cost(c, pi.reversed())


@given(seed=st.integers(0, 10**6), fam=families)
@settings(max_examples=40, deadline=None)
def test_per_vertex_costs_sum_to_k_times_total(seed, fam):
    family, k = fam
    rng = random.Random(seed)
    c = random_system(family, 7, k, seed)
    sigma = random_ordering(range(7), rng)
    stats = cost_stats(c, sigma)
    assert stats.total == cost(c, sigma)
    assert sum(stats.per_vertex.values()) == k * stats.total
    for v in range(7):
        assert stats.per_vertex[v] == move_cost(c, sigma, v, sigma[v])


# --- move_cost --------------------------------------------------------------

def test_move_cost_small_examples():
    sigma = Ordering({0: 1, 2: 2})
    assert move_cost(SINGLE, sigma, 1, Fraction(3, 2)) == 0
    assert move_cost(SINGLE, sigma, 1, Fraction(5, 2)) == 1


def test_move_cost_collision_raises():
    sigma = Ordering({0: 1, 2: 2})
    with pytest.raises(PositionCollisionError):
        move_cost(SINGLE, sigma, 1, 2)


def test_move_cost_own_position_is_allowed():
    sigma = Ordering({0: 1, 1: 2, 2: 3})
    assert move_cost(SINGLE, sigma, 1, 2) == 0


def test_move_cost_vacuous_when_domain_too_small():
    assert move_cost(SINGLE, Ordering({0: 1}), 1, 5) == 0


def test_move_cost_random_n8_matches_bruteforce(rng):
    c = random_system("betweenness", 8, 3, seed=77)
    sigma = random_ordering(range(8), rng)
    for v in range(8):
        for p in (Fraction(-1), Fraction(1, 3), Fraction(5001, 13), sigma[v]):
            assert move_cost(c, sigma, v, p) == brute.move_cost(c, sigma.pos, v, p)


@given(seed=st.integers(0, 10**6), fam=families)
@settings(max_examples=40, deadline=None)
def test_profile_matches_move_cost_at_every_gap(seed, fam):
    family, k = fam
    rng = random.Random(seed)
    c = random_system(family, 7, k, seed)
    sigma = random_ordering(range(7), rng)
    v = rng.randrange(7)
    profile = move_cost_profile(c, sigma, v)
    others = sorted(p for u, p in sigma.pos.items() if u != v)
    gaps = [others[0] - 1] + [(a + b) / 2 for a, b in zip(others, others[1:])] + [others[-1] + 1]
    assert len(profile) == len(gaps)
    for g, p in enumerate(gaps):
        assert gap_index(sigma, v, p) == g
        assert profile[g] == move_cost(c, sigma, v, p)


# --- ranking_of / rounding / grid ------------------------------------------

def test_ranking_of_examples():
    assert ranking_of(Ordering({4: 0.2, 9: 7.1})).rank == {4: 1, 9: 2}
    pi = Ranking((3, 1, 2, 0))
    assert ranking_of(pi.as_ordering()) == pi
    n, a, b = 10, 2, 6
    tied = Ordering({a: 5 + Fraction(a, n + 1), b: 5 + Fraction(b, n + 1)})
    assert ranking_of(tied).order == (a, b)


def test_round_ordering_direct_formula():
    pi = Ranking((0, 1, 2, 4, 5, 6, 3, 7, 8, 9))
    assert pi.rank[3] == 7
    sigma = round_ordering(pi, Fraction(1, 2), 10)
    assert sigma[3] == 5 + Fraction(3, 11)


def test_round_ordering_eps_one():
    # ranks 1..n-1 floor to bucket 0; rank n lands exactly on bucket 1
    pi = Ranking((4, 0, 3, 1, 2))
    sigma = round_ordering(pi, 1, 5)
    assert sigma[2] == 5 + Fraction(2, 6)
    assert all(sigma[u] == Fraction(u, 6) for u in (0, 1, 3, 4))
    assert ranking_of(sigma).order == (0, 1, 3, 4, 2)


def test_round_ordering_orders_bucket_by_vertex_id(rng):
    n, eps = 12, Fraction(1, 4)
    pi = random_ranking(range(n), rng)
    sigma = round_ordering(pi, eps, n)
    order = ranking_of(sigma).order
    buckets = {}
    for u in order:
        buckets.setdefault(sigma[u] // (eps * n), []).append(u)
    for members in buckets.values():
        assert members == sorted(members)
    for u in range(n):
        assert sigma[u] in position_grid(u, n, eps)


def test_position_grid_examples():
    assert position_grid(3, 10, Fraction(1, 2)) == [Fraction(3, 11), 5 + Fraction(3, 11), 10 + Fraction(3, 11)]
    assert len(position_grid(0, 7, 1)) == 2


@given(n=st.integers(3, 30), inv=st.integers(1, 10), u=st.integers(0, 29), v=st.integers(0, 29))
def test_position_grids_are_disjoint(n, inv, u, v):
    eps = Fraction(1, inv)
    if u >= n or v >= n or u == v or eps * n < 1:
        return
    assert not set(position_grid(u, n, eps)) & set(position_grid(v, n, eps))


# --- Kendall tau / crossings --------------------------------------------------

def test_kendall_tau_examples():
    pi = Ranking((0, 1, 2, 3))
    assert kendall_tau(pi, pi) == 0
    assert kendall_tau(pi, pi.reversed()) == math.comb(4, 2)
    assert kendall_tau(pi, Ranking((0, 2, 1, 3))) == 1


def test_kendall_tau_domain_mismatch():
    with pytest.raises(DomainMismatchError):
        kendall_tau(Ranking((0, 1)), Ranking((0, 2)))


@given(seed=st.integers(0, 10**6), m=st.integers(0, 40))
@settings(max_examples=80)
def test_kendall_tau_fast_equals_quadratic(seed, m):
    rng = random.Random(seed)
    a, b = random_ordering(range(m), rng), random_ordering(range(m), rng)
    assert kendall_tau(a, b) == kendall_tau_naive(a, b) == brute.kendall(a.pos, b.pos)


@given(seed=st.integers(0, 10**6), m=st.integers(1, 15))
@settings(max_examples=60)
def test_kendall_tau_is_a_metric(seed, m):
    rng = random.Random(seed)
    a, b, c = (random_ranking(range(m), rng) for _ in range(3))
    assert kendall_tau(a, b) == kendall_tau(b, a)
    assert (kendall_tau(a, b) == 0) == (a == b)
    assert kendall_tau(a, c) <= kendall_tau(a, b) + kendall_tau(b, c)


def test_crossing_stats_examples():
    sigma = Ordering({0: 1, 1: 2, 2: 3})
    assert crossing_stats(sigma, Fraction(5, 2), sigma, Fraction(5, 2)) == (0, 0, 0)
    moved = Ordering({0: 1, 1: 4, 2: 3})
    assert crossing_stats(sigma, Fraction(5, 2), moved, Fraction(5, 2)) == (1, 0, 1)


@given(seed=st.integers(0, 10**6))
@settings(max_examples=60)
def test_crossing_stats_match_bruteforce_and_net_flow_identity(seed):
    rng = random.Random(seed)
    a, b = random_ordering(range(10), rng), random_ordering(range(10), rng)
    # quarter offsets never coincide with the sevenths used for positions
    p, p_prime = Fraction(rng.randrange(150), 1) + Fraction(1, 4), Fraction(rng.randrange(150)) + Fraction(3, 4)
    ltr, rtl, net = crossing_stats(a, p, b, p_prime)
    assert (ltr, rtl) == brute.crossings(a.pos, p, b.pos, p_prime)
    assert ltr - rtl == net


# --- fragility --------------------------------------------------------------

def test_betweenness_constraints_are_fragile():
    c = random_system("betweenness", 6, 3, seed=2)
    assert all(check_fragility(c, s, "fragile") for s in c.payload)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_kfast_constraints_are_fragile(k):
    c = random_system("kfast", k + 2, k, seed=k)
    assert all(check_fragility(c, s, "fragile") for s in c.payload)


def test_kbetweenness_weak_but_not_fragile():
    c = random_system("kbetweenness", 6, 4, seed=5)
    assert all(check_fragility(c, s, "weak") for s in c.payload)
    assert not all(check_fragility(c, s, "fragile") for s in c.payload)


def test_weak_equals_fragile_for_small_arity():
    for bits in range(1 << 6):
        table = [(bits >> i) & 1 for i in range(6)]
        c = ConstraintSystem(3, 3, "table", {(0, 1, 2): table})
        assert check_fragility(c, (0, 1, 2), "weak") == check_fragility(c, (0, 1, 2), "fragile")


def test_non_fragile_table_detected():
    c = ConstraintSystem(3, 3, "table", {(0, 1, 2): [0, 0, 1, 1, 1, 1]})
    assert not check_fragility(c, (0, 1, 2), "fragile")


# --- separation lower bound at k = 3 -----------------------------------------

@given(seed=st.integers(0, 10**6), family=st.sampled_from(["betweenness", "kfast", "table"]))
@settings(max_examples=60, deadline=None)
def test_separated_placements_cost_at_least_one(seed, family):
    rng = random.Random(seed)
    n = 7
    c = random_system(family, n, 3, seed)
    pi = random_ranking(range(n), rng)
    sigma = pi.as_ordering()
    v = rng.randrange(n)
    slots = [Fraction(2 * j + 1, 2) for j in range(n + 1)]
    p, p_prime = sorted(rng.sample(slots, 2))
    between = [u for u in range(n) if u != v and p < sigma[u] < p_prime]
    total = move_cost(c, sigma, v, p) + move_cost(c, sigma, v, p_prime)
    if between:
        assert total >= 1


def test_cost_over_subset_domain_only_counts_inside(rng):
    c = random_system("betweenness", 8, 3, seed=3)
    sub = Ordering({u: Fraction(i) for i, u in enumerate([5, 1, 7, 2])})
    expected = sum(c.violated(s) for s in combinations((5, 1, 7, 2), 3))
    assert cost(c, sub) == expected
