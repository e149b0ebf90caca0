"""Approximation scheme and exact oracles for fully dense ranking CSPs."""

from .core import (
    BETWEENNESS,
    KBETWEENNESS,
    KFAST,
    TABLE,
    ConstraintSystem,
    Ordering,
    Ranking,
    check_fragility,
    cost,
    cost_stats,
    crossing_stats,
    evaluate,
    kendall_tau,
    move_cost,
    position_grid,
    ranking_of,
    round_ordering,
)
from .errors import RankCSPError
from .fas import FasInstance, cancel_fas, derive_fas, fas_cost, fas_move_cost
from .instances import PlantedInstance, gen_planted, parse, serialize
from .oracle import OracleResult, enumerate_opt, exact_opt
from .pipeline import PtasConfig, PtasResult, run_ptas

__version__ = "0.1.0"

__all__ = [
    "BETWEENNESS", "KBETWEENNESS", "KFAST", "TABLE",
    "ConstraintSystem", "Ordering", "Ranking", "RankCSPError",
    "check_fragility", "cost", "cost_stats", "crossing_stats", "evaluate",
    "kendall_tau", "move_cost", "position_grid", "ranking_of", "round_ordering",
    "FasInstance", "cancel_fas", "derive_fas", "fas_cost", "fas_move_cost",
    "PlantedInstance", "gen_planted", "parse", "serialize",
    "OracleResult", "enumerate_opt", "exact_opt",
    "PtasConfig", "PtasResult", "run_ptas",
]
