"""Command-line entry point: ``rankcsp {gen,solve,exact,check,bench}``.

Errors go to stderr as one JSON object ``{"error": ..., "message": ...}`` and
the exit code is nonzero (2 for usage errors, 1 otherwise).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import random
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from fractions import Fraction

from . import core, fas, instances, oracle, pipeline
from .errors import RankCSPError

REVERSAL_SYMMETRIC = (core.BETWEENNESS, core.KBETWEENNESS)

BENCH_COLUMNS = [
    "instance_id",
    "n",
    "k",
    "family",
    "noise",
    "eps",
    "guess_mode",
    "fast_solver",
    "seed",
    "cost_alg",
    "cost_pi4",
    "cost_opt",
    "ratio",
    "exact_zero_match",
    "kendall_to_planted",
    "kendall_to_opt",
    "took_additive_branch",
    "u_size",
    "wall_ms",
    "wbar_pair_min_norm",
    "wbar_pair_max_norm",
    "dist_opt_scaled",
    "out_of_place_frac",
]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def _emit_error(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": message}) + "\n")
    return code


def _guess_arg(text):
    if text in ("auto", "oracle", "exhaustive"):
        return text, None
    name, _, count = text.partition(":")
    if name == "restarts":
        try:
            r = int(count) if count else 32
        except ValueError:
            raise argparse.ArgumentTypeError(f"bad restart count in {text!r}") from None
        if r <= 0:
            raise argparse.ArgumentTypeError("restart count must be positive")
        return "restarts", r
    raise argparse.ArgumentTypeError(f"unknown guess mode {text!r}")


def _constants_arg(text):
    if text == "paper":
        return None
    name, _, value = text.partition(":")
    if name == "scaled" and value:
        try:
            return core.to_fraction(value)
        except (ValueError, ZeroDivisionError):
            pass
    raise argparse.ArgumentTypeError(f"constants must be 'paper' or 'scaled:GAMMA', got {text!r}")


def _fraction_arg(text):
    try:
        return core.to_fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a rational number: {text!r}") from None


def build_parser():
    parser = _Parser(prog="rankcsp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="generate a planted instance")
    gen.add_argument("--family", default=core.BETWEENNESS, choices=core.FAMILIES)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--k", type=int, default=None, help="arity (default 3, or 4 for kbetweenness)")
    gen.add_argument("--noise", type=_fraction_arg, default=Fraction(0))
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", default="-")

    def solver_flags(p):
        p.add_argument("--eps", type=_fraction_arg, default=Fraction(1, 4))
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--guess", type=_guess_arg, default=("auto", None),
                       help="auto | oracle | exhaustive | restarts:R")
        p.add_argument("--fast", default="auto", choices=pipeline.FAST_SOLVERS)
        p.add_argument("--additive", default="auto", choices=pipeline.ADDITIVE_SOLVERS)
        p.add_argument("--constants", type=_constants_arg, default=None,
                       help="paper | scaled:GAMMA")
        p.add_argument("--max-guesses", type=int, default=4096)

    solve = sub.add_parser("solve", help="run the approximation scheme on an instance file")
    solve.add_argument("instance")
    solver_flags(solve)
    solve.add_argument("--emit-candidates", action="store_true")

    exact = sub.add_parser("exact", help="exact optimum by branch and bound")
    exact.add_argument("instance")
    exact.add_argument("--cap", type=int, default=oracle.EXACT_OPT_CAP)

    check = sub.add_parser("check", help="fragility and identity checks on an instance file")
    check.add_argument("instance")
    check.add_argument("--samples", type=int, default=5, help="random orderings per identity check")
    check.add_argument("--seed", type=int, default=0)

    bench = sub.add_parser("bench", help="sweep planted instances and write CSV")
    bench.add_argument("--family", default=core.BETWEENNESS, choices=core.FAMILIES)
    bench.add_argument("--n", type=int, nargs="+", required=True)
    bench.add_argument("--k", type=int, default=None)
    bench.add_argument("--noise", type=_fraction_arg, nargs="+", default=[Fraction(0)])
    bench.add_argument("--eps", type=_fraction_arg, nargs="+", default=[Fraction(1, 4)])
    bench.add_argument("--seeds", type=int, default=10)
    bench.add_argument("--seed-start", type=int, default=0)
    bench.add_argument("--guess", type=_guess_arg, default=("oracle", None))
    bench.add_argument("--fast", default="auto", choices=pipeline.FAST_SOLVERS)
    bench.add_argument("--additive", default="auto", choices=pipeline.ADDITIVE_SOLVERS)
    bench.add_argument("--constants", type=_constants_arg, default=None)
    bench.add_argument("--cap", type=int, default=oracle.EXACT_OPT_CAP,
                       help="largest n solved exactly for the OPT column")
    bench.add_argument("--out", default="-")
    return parser


def _default_k(family, k):
    if k is not None:
        return k
    return 4 if family == core.KBETWEENNESS else 3


def _write(path, data: bytes):
    if path == "-":
        sys.stdout.buffer.write(data)
        sys.stdout.flush()
    else:
        with open(path, "wb") as fh:
            fh.write(data)


def _config(args, guess) -> pipeline.PtasConfig:
    mode, restarts = guess
    return pipeline.PtasConfig(
        eps=args.eps,
        seed=args.seed,
        guess=mode,
        restarts=restarts or 32,
        fast_solver=args.fast,
        additive_solver=args.additive,
        gamma=args.constants,
        max_guesses=args.max_guesses,
    )


def cmd_gen(args):
    k = _default_k(args.family, args.k)
    try:
        instances.check_family(args.family, k)
        if args.n < k:
            raise ValueError(f"need n >= k (n={args.n}, k={k})")
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    inst = instances.gen_planted(args.family, args.n, k, args.noise, args.seed)
    _write(args.out, instances.serialize(inst))
    return 0


def _reference_for(obj, c, mode):
    """Oracle guesses come from the embedded planted ranking, else from the exact optimum."""
    if mode not in ("oracle", "auto"):
        return None
    if isinstance(obj, instances.PlantedInstance):
        return obj.planted
    if c.n <= oracle.EXACT_OPT_CAP:
        return oracle.exact_opt(c).witness
    if mode == "oracle":
        raise RankCSPError(
            f"oracle guessing needs a planted ranking or n <= {oracle.EXACT_OPT_CAP}"
        )
    return None


def _stage_json(stage: pipeline.StageRecord):
    return {
        "guess": stage.guess_index,
        "unambiguous": len(stage.unambiguous),
        "certified_local_opt": stage.certified,
        "pi3": list(stage.pi3.order),
        "cost": stage.cost,
        "wbar_pair_sums": None if stage.pair_sums is None else [str(x) for x in stage.pair_sums],
        "timings_ms": {k: round(v, 3) for k, v in stage.timings.items()},
    }


def result_json(result: pipeline.PtasResult, config, emit_candidates=False):
    out = {
        "ranking": list(result.best.order),
        "cost": result.best_cost,
        "took_additive_branch": result.took_additive_branch,
        "additive": {
            "ranking": list(result.additive.order),
            "cost": result.additive_cost,
            "guaranteed": result.additive_guaranteed,
        },
        "eps": str(config.eps),
        "seed": config.seed,
        "sample_size": None if result.plan is None else result.plan.t,
        "guesses": len(result.candidates),
        "best_candidate": result.best_candidate,
        "stages": [_stage_json(s) for s in result.stages],
    }
    if emit_candidates:
        out["candidates"] = [
            {"ranking": list(r.order), "cost": value} for r, value in result.candidates
        ]
    return out


def cmd_solve(args):
    obj = instances.load(args.instance)
    c = instances.system_of(obj)
    config = _config(args, args.guess)
    reference = _reference_for(obj, c, config.guess)
    result = pipeline.run_ptas(c, config, reference)
    print(json.dumps(result_json(result, config, args.emit_candidates), indent=2))
    return 0


def cmd_exact(args):
    c = instances.system_of(instances.load(args.instance))
    res = oracle.exact_opt(c, args.cap)
    print(json.dumps({"opt_cost": res.opt_cost, "witness": list(res.witness.order),
                      "explored": res.explored}, indent=2))
    return 0


def run_checks(c: core.ConstraintSystem, samples=5, seed=0):
    """Fragility per family plus the exact identities; one dict per check."""
    rng = random.Random(seed)
    results = []

    mode = "weak" if c.family in (core.KBETWEENNESS, core.TABLE) else "fragile"
    bad = None
    for s in sorted(c.payload):
        witness = core.fragility_counterexample(c, s, mode)
        if witness is not None:
            bad = {"subset": list(s), "satisfied": list(witness[0]), "also_satisfied": list(witness[1])}
            break
    results.append({"name": f"fragility[{mode}]", "passed": bad is None, "counterexample": bad})

    orderings = []
    for _ in range(samples):
        order = list(range(c.n))
        rng.shuffle(order)
        orderings.append(core.Ranking(tuple(order)))

    def first_failure(name, predicate):
        for r in orderings:
            detail = predicate(r)
            if detail is not None:
                return {"name": name, "passed": False, "counterexample": {"ranking": list(r.order), **detail}}
        return {"name": name, "passed": True, "counterexample": None}

    def stats_identity(r):
        st = core.cost_stats(c, r)
        if sum(st.per_vertex.values()) != c.k * st.total:
            return {"total": st.total, "per_vertex_sum": sum(st.per_vertex.values())}
        for v in r.order:
            b = core.move_cost(c, r, v, r.rank[v])
            if b != st.per_vertex[v]:
                return {"vertex": v, "move_cost": b, "per_vertex": st.per_vertex[v]}
        return None

    def fas_identities(r):
        if c.n < c.k:
            return None
        w = fas.derive_fas(c, r)
        total = core.cost(c, r)
        lhs = fas.fas_cost(w, r)
        if lhs != math.comb(c.k, 2) * total:
            return {"fas_cost": str(lhs), "cost": total}
        sigma = r.as_ordering()
        for v in r.order:
            bw = fas.fas_move_cost(w, sigma, v, sigma[v])
            b = core.move_cost(c, sigma, v, sigma[v])
            if bw != (c.k - 1) * b:
                return {"vertex": v, "fas_move_cost": str(bw), "move_cost": b}
        return None

    def cancellation(r):
        if c.n < c.k:
            return None
        w = fas.derive_fas(c, r)
        wbar = fas.cancel_fas(w, c.k)
        a, b = orderings[0], r
        if fas.fas_cost(w, a) - fas.fas_cost(w, b) != fas.fas_cost(wbar, a) - fas.fas_cost(wbar, b):
            return {"other": list(a.order)}
        return None

    results.append(first_failure("cost_stats_identity", stats_identity))
    results.append(first_failure("fas_identities", fas_identities))
    results.append(first_failure("cancellation_invariance", cancellation))
    return results


def cmd_check(args):
    c = instances.system_of(instances.load(args.instance))
    results = run_checks(c, args.samples, args.seed)
    ok = all(r["passed"] for r in results)
    print(json.dumps({"passed": ok, "checks": results}, indent=2))
    return 0 if ok else 1


def _fmt(x):
    if x is None:
        return ""
    if isinstance(x, bool):
        return "1" if x else "0"
    if isinstance(x, float):
        return f"{x:.6f}"
    if isinstance(x, Fraction):
        return f"{float(x):.6f}"
    return str(x)


def _distance(a, b, family):
    d = core.kendall_tau(a, b)
    if family in REVERSAL_SYMMETRIC:
        d = min(d, core.kendall_tau(a, b.reversed()))
    return d


def bench_row(family, n, k, noise, eps, seed, guess, fast_solver, additive, gamma, cap):
    """One benchmark record as a dict keyed by BENCH_COLUMNS."""
    inst = instances.gen_planted(family, n, k, noise, seed)
    c = inst.system
    opt = oracle.exact_opt(c, cap) if n <= cap else None
    mode, restarts = guess
    reference = opt.witness if opt is not None else inst.planted
    config = pipeline.PtasConfig(
        eps=eps, seed=seed, guess=mode, restarts=restarts or 32,
        fast_solver=fast_solver, additive_solver=additive, gamma=gamma,
    )
    started = time.perf_counter()
    result = pipeline.run_ptas(c, config, reference)
    wall_ms = (time.perf_counter() - started) * 1000

    stage = None if result.best_candidate is None else result.stages[result.best_candidate]
    pi4 = None if stage is None else stage.pi4
    row = dict.fromkeys(BENCH_COLUMNS)
    row.update(
        instance_id=f"{family}-n{n}-k{k}-r{noise}-s{seed}",
        n=n, k=k, family=family, noise=str(noise), eps=str(eps),
        guess_mode=mode if restarts is None else f"{mode}:{restarts}",
        fast_solver=fast_solver, seed=seed,
        cost_alg=result.best_cost,
        cost_pi4=None if stage is None else stage.cost,
        kendall_to_planted=_distance(result.best, inst.planted, family),
        took_additive_branch=result.took_additive_branch,
        wall_ms=wall_ms,
    )
    if opt is not None:
        row["cost_opt"] = opt.opt_cost
        row["kendall_to_opt"] = _distance(result.best, opt.witness, family)
        if opt.opt_cost > 0:
            row["ratio"] = result.best_cost / opt.opt_cost
            row["exact_zero_match"] = False
            if pi4 is not None:
                d = _distance(pi4, opt.witness, family)
                row["dist_opt_scaled"] = d * n ** (k - 2) / opt.opt_cost
        else:
            row["exact_zero_match"] = result.best_cost == 0
    if stage is not None:
        m = len(stage.unambiguous)
        row["u_size"] = m
        if stage.pair_sums is not None and math.comb(m - 2, k - 2) > 0:
            scale = math.comb(m - 2, k - 2)
            row["wbar_pair_min_norm"] = stage.pair_sums[0] / scale
            row["wbar_pair_max_norm"] = stage.pair_sums[1] / scale
        row["out_of_place_frac"] = pipeline.out_of_place_fraction(stage.sigma1, reference, eps, k)
    return row


def _bench_task(params):
    return bench_row(*params)


def bench_rows(args):
    k = _default_k(args.family, args.k)
    try:
        instances.check_family(args.family, k)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    tasks = [
        (args.family, n, k, noise, eps, seed, args.guess, args.fast, args.additive, args.constants, args.cap)
        for n in args.n
        for noise in args.noise
        for eps in args.eps
        for seed in range(args.seed_start, args.seed_start + args.seeds)
    ]
    threads = max(1, int(os.environ.get("RANKCSP_THREADS", "1")))
    if threads > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            rows = list(pool.map(_bench_task, tasks))
    else:
        rows = [_bench_task(t) for t in tasks]
    rows.sort(key=lambda r: (r["instance_id"], r["eps"], r["seed"]))
    return rows


def format_csv(rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(BENCH_COLUMNS)
    for row in rows:
        writer.writerow([_fmt(row[col]) for col in BENCH_COLUMNS])
    return buf.getvalue()


def cmd_bench(args):
    _write(args.out, format_csv(bench_rows(args)).encode("utf-8"))
    return 0


COMMANDS = {
    "gen": cmd_gen,
    "solve": cmd_solve,
    "exact": cmd_exact,
    "check": cmd_check,
    "bench": cmd_bench,
}


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _emit_error("usage", str(exc), 2)
    except (RankCSPError, ValueError, OSError) as exc:
        return _emit_error(type(exc).__name__, str(exc), 1)


if __name__ == "__main__":
    sys.exit(main())
