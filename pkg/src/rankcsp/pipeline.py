"""The approximation scheme for weakly fragile ranking CSPs in tournaments.

Stages, per guess of the sampled vertices' buckets:

1. additive approximation, returned outright if its cost is already large
2. sample (k-1)-sets and guess a bucketed ordering of the sampled vertices
3. greedy bucketed ordering sigma1 from the samples
4. keep the unambiguous vertices U with their best bucket (sigma2)
5. cancelled local FAS instance over U, FAST solve, single-vertex local search (pi3)
6. greedy reinsertion of the ambiguous vertices (pi4)
"""

from __future__ import annotations

import logging
import math
import random
import time
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Iterator, Optional

from .core import (
    ConstraintSystem,
    Ordering,
    Ranking,
    cost,
    move_cost_profile,
    position_grid,
    ranking_of,
    round_ordering,
    to_fraction,
)
from .errors import GuessBudgetError, InstanceTooSmallError
from .fas import (
    EXACT_CAP,
    cancel_fas,
    derive_fas,
    pair_sum_bounds,
    solve_fas_exact,
    solve_fas_local,
    solve_fas_pivot,
)
from .oracle import EXACT_OPT_CAP, exact_opt
from .search import csp_local_search, pivot_baseline

log = logging.getLogger(__name__)

GUESS_MODES = ("auto", "oracle", "exhaustive", "restarts")
FAST_SOLVERS = ("auto", "exact", "local", "pivot-local")
ADDITIVE_SOLVERS = ("auto", "exact", "heuristic")


def _rng(seed, tag):
    return random.Random(f"{seed}:{tag}")


@dataclass(frozen=True)
class PtasConfig:
    eps: Fraction = Fraction(1, 4)
    seed: int = 0
    guess: str = "auto"
    restarts: int = 32
    fast_solver: str = "auto"
    additive_solver: str = "auto"
    # None keeps the published constants; otherwise thresholds are multiplied by gamma
    gamma: Optional[Fraction] = None
    max_guesses: int = 4096
    max_local_passes: int = 10_000
    exact_cap: int = EXACT_CAP
    oracle_cap: int = EXACT_OPT_CAP

    def __post_init__(self):
        eps = to_fraction(self.eps)
        if not 0 < eps <= 1:
            raise ValueError("eps must lie in (0, 1]")
        object.__setattr__(self, "eps", eps)
        if self.gamma is not None:
            gamma = to_fraction(self.gamma)
            if gamma < 0:
                raise ValueError("gamma must be nonnegative")
            object.__setattr__(self, "gamma", gamma)
        if self.guess not in GUESS_MODES:
            raise ValueError(f"guess mode must be one of {GUESS_MODES}")
        if self.fast_solver not in FAST_SOLVERS:
            raise ValueError(f"fast solver must be one of {FAST_SOLVERS}")
        if self.additive_solver not in ADDITIVE_SOLVERS:
            raise ValueError(f"additive solver must be one of {ADDITIVE_SOLVERS}")
        for name in ("restarts", "max_guesses", "max_local_passes", "exact_cap", "oracle_cap"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")

    @property
    def scale(self) -> Fraction:
        return Fraction(1) if self.gamma is None else self.gamma


@dataclass(frozen=True)
class SamplePlan:
    t: int
    sets: tuple

    @property
    def sampled(self) -> tuple:
        return tuple(sorted({u for s in self.sets for u in s}))


@dataclass
class StageRecord:
    guess_index: int
    sigma0: Ordering
    sigma1: Ordering
    unambiguous: tuple
    sigma2: Ordering
    pi3: Ranking
    certified: bool
    pi4: Ranking
    cost: int
    pair_sums: Optional[tuple]
    timings: dict = field(default_factory=dict, compare=False)


@dataclass
class PtasResult:
    best: Ranking
    best_cost: int
    candidates: list
    stages: list
    took_additive_branch: bool
    additive: Ranking
    additive_cost: int
    additive_guaranteed: bool
    plan: Optional[SamplePlan] = None
    best_candidate: Optional[int] = None
    wall_ms: float = field(default=0.0, compare=False)


def additive_threshold(n: int, k: int, eps: Fraction, scale: Fraction = Fraction(1)) -> Fraction:
    return scale * eps ** 4 * n ** k


def unambiguous_threshold(n: int, k: int, eps: Fraction, scale: Fraction = Fraction(1)) -> Fraction:
    return scale * 13 * k ** 4 * 3 ** (k - 1) * eps * math.comb(n - 1, k - 1)


def add_approx(c: ConstraintSystem, delta, backend: str = "auto", cap: int = EXACT_OPT_CAP, seed: int = 0):
    """Ranking within ``delta`` of optimal, as ``(ranking, guaranteed)``.

    The exact backend is optimal and so meets any additive bound.  The
    heuristic backend (pivoting then local search) carries no guarantee.
    """
    if to_fraction(delta) <= 0:
        raise ValueError("delta must be positive")
    if backend == "auto":
        backend = "exact" if c.n <= cap else "heuristic"
    if backend == "exact":
        return exact_opt(c, cap, seed=seed).witness, True
    if backend == "heuristic":
        return csp_local_search(c, pivot_baseline(c, seed)), False
    raise ValueError(f"unknown additive backend {backend!r}")


def sample_size(k: int, eps) -> int:
    eps = to_fraction(eps)
    return math.ceil(14 * math.log(40 / eps) / (math.comb(k, 2) * eps))


def sample_plan(n: int, k: int, eps, seed: int = 0) -> SamplePlan:
    if n < k:
        raise InstanceTooSmallError(f"need n >= k (n={n}, k={k})")
    t = sample_size(k, eps)
    rng = _rng(seed, "plan")
    sets = tuple(tuple(sorted(rng.sample(range(n), k - 1))) for _ in range(t))
    return SamplePlan(t, sets)


def guess_count(plan: SamplePlan, eps) -> int:
    return (math.floor(1 / to_fraction(eps)) + 1) ** len(plan.sampled)


def guess_iter(
    mode: str,
    plan: SamplePlan,
    eps,
    n: int,
    reference: Optional[Ranking] = None,
    restarts: int = 32,
    seed: int = 0,
    max_guesses: int = 4096,
) -> Iterator[Ordering]:
    """Bucketed orderings of the sampled vertices to try as the guess."""
    eps = to_fraction(eps)
    sampled = plan.sampled
    if mode == "oracle":
        if reference is None:
            raise ValueError("oracle guessing needs a reference ranking")
        yield round_ordering(reference, eps, n).restrict(sampled)
    elif mode == "exhaustive":
        required = guess_count(plan, eps)
        if required > max_guesses:
            raise GuessBudgetError(required, max_guesses)
        grids = [position_grid(u, n, eps) for u in sampled]
        for choice in product(*grids):
            yield Ordering(dict(zip(sampled, choice)))
    elif mode == "restarts":
        rng = _rng(seed, "restarts")
        grids = [position_grid(u, n, eps) for u in sampled]
        for _ in range(restarts):
            yield Ordering({u: rng.choice(g) for u, g in zip(sampled, grids)})
    else:
        raise ValueError(f"unknown guess mode {mode!r}")


def _sample_views(sigma0: Ordering, plan: SamplePlan):
    views = []
    for s in plan.sets:
        ordered = tuple(sorted(s, key=sigma0.pos.__getitem__))
        views.append((frozenset(s), ordered, [sigma0.pos[u] for u in ordered]))
    return views


def _estimate_counts(c, views, u, grid):
    counts = [0] * len(grid)
    violated = c.violated
    for members, ordered, positions in views:
        if u in members:
            continue
        gaps = [bisect_left(positions, p) for p in grid]
        cache = {}
        for i, g in enumerate(gaps):
            if g not in cache:
                cache[g] = violated(ordered[:g] + (u,) + ordered[g:])
            counts[i] += cache[g]
    return counts


def sample_estimates(c: ConstraintSystem, sigma0: Ordering, plan: SamplePlan, u: int, eps) -> list:
    """Estimated move cost of u at each of its grid positions, scaled by C(n, k-1)/t."""
    grid = position_grid(u, c.n, eps)
    counts = _estimate_counts(c, _sample_views(sigma0, plan), u, grid)
    scale = Fraction(math.comb(c.n, c.k - 1), plan.t)
    return [scale * x for x in counts]


def greedy_sigma1(c: ConstraintSystem, sigma0: Ordering, plan: SamplePlan, eps) -> Ordering:
    views = _sample_views(sigma0, plan)
    pos = {}
    for u in range(c.n):
        grid = position_grid(u, c.n, eps)
        counts = _estimate_counts(c, views, u, grid)
        # first minimum is the smallest position: grids ascend
        pos[u] = grid[min(range(len(grid)), key=counts.__getitem__)]
    return Ordering(pos)


def grid_move_costs(c: ConstraintSystem, sigma: Ordering, v: int, eps) -> list:
    """``b(sigma, v, p)`` for every p in v's position grid."""
    grid = position_grid(v, c.n, eps)
    profile = move_cost_profile(c, sigma, v)
    others = sorted(p for u, p in sigma.pos.items() if u != v)
    return [profile[bisect_left(others, p)] for p in grid]


def unambiguous(c: ConstraintSystem, sigma1: Ordering, eps, gamma=None):
    """Vertices whose best grid position costs at most the threshold, and that position."""
    eps = to_fraction(eps)
    scale = Fraction(1) if gamma is None else to_fraction(gamma)
    theta = unambiguous_threshold(c.n, c.k, eps, scale)
    grids = {}
    for v in sorted(sigma1.pos):
        costs = grid_move_costs(c, sigma1, v, eps)
        best = min(range(len(costs)), key=costs.__getitem__)
        if costs[best] <= theta:
            grids[v] = position_grid(v, c.n, eps)[best]
    return tuple(sorted(grids)), Ordering(grids)


@dataclass(frozen=True)
class CoreSolve:
    ranking: Ranking
    certified: bool
    pair_sums: Optional[tuple]


def solve_core(c: ConstraintSystem, sigma2: Ordering, config: PtasConfig, seed: int = 0) -> CoreSolve:
    if len(sigma2) < c.k:
        return CoreSolve(ranking_of(sigma2), True, None)
    f = cancel_fas(derive_fas(c, sigma2), c.k)
    solver = config.fast_solver
    if solver == "auto":
        solver = "exact" if len(f) <= config.exact_cap else "pivot-local"
    if solver == "exact":
        start = solve_fas_exact(f, config.exact_cap)
    elif solver == "local":
        start = ranking_of(sigma2)
    else:
        start = solve_fas_pivot(f, seed)
    ranking, certified = solve_fas_local(f, start, config.max_local_passes)
    return CoreSolve(ranking, certified, pair_sum_bounds(f))


def insert_ambiguous(c: ConstraintSystem, pi3: Ranking, rest, n: Optional[int] = None):
    """Place each left-out vertex independently in its cheapest gap of ``pi3``."""
    n = c.n if n is None else n
    pos = {u: Fraction(r) for u, r in pi3.rank.items()}
    for v in sorted(rest):
        profile = move_cost_profile(c, pi3, v)
        slot = min(range(len(profile)), key=profile.__getitem__)
        # (v+1)/(n+1) lies strictly inside (0, 1) and differs per vertex
        pos[v] = slot + Fraction(v + 1, n + 1)
    sigma4 = Ordering(pos)
    return sigma4, sigma4.ranking()


def _resolve_guess(config: PtasConfig, reference):
    if config.guess == "auto":
        return "oracle" if reference is not None else "restarts"
    return config.guess


def run_ptas(c: ConstraintSystem, config: PtasConfig = PtasConfig(), reference: Optional[Ranking] = None) -> PtasResult:
    n, k, eps = c.n, c.k, config.eps
    if n < k:
        raise InstanceTooSmallError(f"need n >= k (n={n}, k={k})")
    started = time.perf_counter()

    additive, guaranteed = add_approx(
        c, eps ** 5 * n ** k, config.additive_solver, config.oracle_cap, config.seed
    )
    additive_cost = cost(c, additive)
    if additive_cost >= additive_threshold(n, k, eps, config.scale):
        log.info("additive branch: cost %d", additive_cost)
        return PtasResult(
            best=additive,
            best_cost=additive_cost,
            candidates=[],
            stages=[],
            took_additive_branch=True,
            additive=additive,
            additive_cost=additive_cost,
            additive_guaranteed=guaranteed,
            wall_ms=(time.perf_counter() - started) * 1000,
        )

    plan = sample_plan(n, k, eps, config.seed)
    mode = _resolve_guess(config, reference)
    guesses = guess_iter(
        mode, plan, eps, n, reference, config.restarts, config.seed, config.max_guesses
    )
    candidates, stages = [], []
    everyone = set(range(n))
    for index, sigma0 in enumerate(guesses):
        clock = time.perf_counter()
        timings = {}
        sigma1 = greedy_sigma1(c, sigma0, plan, eps)
        timings["sigma1"], clock = _lap(clock)
        kept, sigma2 = unambiguous(c, sigma1, eps, config.gamma)
        timings["sigma2"], clock = _lap(clock)
        core = solve_core(c, sigma2, config, seed=config.seed + index)
        timings["pi3"], clock = _lap(clock)
        _, pi4 = insert_ambiguous(c, core.ranking, everyone - set(kept), n)
        value = cost(c, pi4)
        timings["pi4"], clock = _lap(clock)
        candidates.append((pi4, value))
        stages.append(
            StageRecord(index, sigma0, sigma1, kept, sigma2, core.ranking, core.certified,
                        pi4, value, core.pair_sums, timings)
        )

    best_index = min(range(len(candidates)), key=lambda i: candidates[i][1])
    best, best_cost = candidates[best_index]
    if additive_cost < best_cost:
        best, best_cost = additive, additive_cost
    return PtasResult(
        best=best,
        best_cost=best_cost,
        candidates=candidates,
        stages=stages,
        took_additive_branch=False,
        additive=additive,
        additive_cost=additive_cost,
        additive_guaranteed=guaranteed,
        plan=plan,
        best_candidate=best_index,
        wall_ms=(time.perf_counter() - started) * 1000,
    )


def _lap(clock):
    now = time.perf_counter()
    return (now - clock) * 1000, now


def out_of_place_fraction(sigma1: Ordering, reference: Ranking, eps, k: int) -> float:
    """Share of vertices farther than 3 k^2 3^(k-1) eps n from their rounded reference position."""
    eps = to_fraction(eps)
    n = len(reference)
    rounded = round_ordering(reference, eps, n)
    limit = 3 * k * k * 3 ** (k - 1) * eps * n
    far = sum(1 for v in rounded.pos if abs(sigma1.pos[v] - rounded.pos[v]) > limit)
    return far / n if n else 0.0
