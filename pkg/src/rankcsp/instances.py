"""Planted and uniform random instances, and the canonical JSON file format."""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass
from fractions import Fraction
from itertools import combinations, permutations

from .core import (
    BETWEENNESS,
    FAMILIES,
    KBETWEENNESS,
    KFAST,
    TABLE,
    ConstraintSystem,
    Ranking,
    to_fraction,
)
from .errors import MalformedInstanceError

FORMAT = "rankcsp-v1"


@dataclass(frozen=True)
class PlantedInstance:
    system: ConstraintSystem
    planted: Ranking
    noise: Fraction
    noised_count: int
    seed: int


def check_family(family: str, k: int):
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; choose from {', '.join(FAMILIES)}")
    if family == BETWEENNESS and k != 3:
        raise ValueError("betweenness requires k = 3")
    if family == KBETWEENNESS and k < 4:
        raise ValueError("kbetweenness requires k >= 4")
    if family == TABLE and k > 4:
        raise ValueError("table requires k <= 4")
    if k < 2:
        raise ValueError("arity must be at least 2")


def _consistent(family, k, ordered):
    """Payload satisfied by ``ordered`` (the subset in planted order)."""
    if family == BETWEENNESS:
        return ordered[1]
    if family == KFAST:
        return tuple(ordered)
    if family == KBETWEENNESS:
        return tuple(sorted((ordered[0], ordered[-1])))
    subset = tuple(sorted(ordered))
    return tuple(int(p != ordered) for p in permutations(subset))


def _alternatives(family, k, ordered):
    """Payloads that differ from the consistent one, in a fixed order."""
    subset = tuple(sorted(ordered))
    if family == BETWEENNESS:
        return [ordered[0], ordered[2]]
    if family == KFAST:
        return [p for p in permutations(subset) if p != tuple(ordered)]
    if family == KBETWEENNESS:
        good = _consistent(family, k, ordered)
        return [pair for pair in combinations(subset, 2) if pair != good]
    # table: a k-FAST style table satisfied by exactly one other order
    return [
        tuple(int(p != alt) for p in permutations(subset))
        for alt in permutations(subset)
        if alt != tuple(ordered)
    ]


def gen_planted(family: str, n: int, k: int, noise=0, seed: int = 0) -> PlantedInstance:
    """Instance consistent with a uniformly drawn planted ranking, then corrupted.

    Each constraint independently, with probability ``noise``, gets a payload
    drawn uniformly from the ones the planted ranking does not satisfy.
    """
    check_family(family, k)
    if n < k:
        raise ValueError(f"need n >= k (n={n}, k={k})")
    noise = to_fraction(noise)
    if not 0 <= noise <= 1:
        raise ValueError("noise must lie in [0, 1]")
    rng = random.Random(seed)
    order = list(range(n))
    rng.shuffle(order)
    planted = Ranking(tuple(order))
    rank = planted.rank
    threshold = float(noise)
    payload, noised = {}, 0
    for s in combinations(range(n), k):
        ordered = tuple(sorted(s, key=rank.__getitem__))
        if rng.random() < threshold:
            payload[s] = rng.choice(_alternatives(family, k, ordered))
            noised += 1
        else:
            payload[s] = _consistent(family, k, ordered)
    return PlantedInstance(ConstraintSystem(n, k, family, payload), planted, noise, noised, seed)


def random_system(family: str, n: int, k: int, seed: int = 0) -> ConstraintSystem:
    """Every payload drawn uniformly (tables: uniform over fragile k-FAST-style tables)."""
    check_family(family, k)
    rng = random.Random(seed)
    payload = {}
    for s in combinations(range(n), k):
        ordered = list(s)
        rng.shuffle(ordered)
        if family == KBETWEENNESS:
            payload[s] = tuple(sorted(rng.sample(s, 2)))
        else:
            payload[s] = _consistent(family, k, tuple(ordered))
    return ConstraintSystem(n, k, family, payload)


def _payload_json(family, d):
    if family == BETWEENNESS:
        return d
    return list(d)


def serialize(obj) -> bytes:
    """Canonical UTF-8 JSON, one constraint per line, subsets in lexicographic order."""
    if isinstance(obj, PlantedInstance):
        c = obj.system
        extra = [
            ("planted", list(obj.planted.order)),
            ("noise", str(obj.noise)),
            ("noised_count", obj.noised_count),
            ("seed", obj.seed),
        ]
    else:
        c = obj
        extra = []
    head = [("format", FORMAT), ("n", c.n), ("k", c.k), ("family", c.family), *extra]
    lines = ["{"]
    for key, value in head:
        lines.append(f"  {json.dumps(key)}: {json.dumps(value)},")
    lines.append('  "constraints": [')
    subsets = sorted(c.payload)
    for i, s in enumerate(subsets):
        entry = json.dumps({"s": list(s), "d": _payload_json(c.family, c.payload[s])})
        lines.append(f"    {entry}{',' if i < len(subsets) - 1 else ''}")
    lines.append("  ]")
    lines.append("}")
    return ("\n".join(lines) + "\n").encode("utf-8")


def parse(data):
    """Inverse of :func:`serialize`; returns a PlantedInstance when planted data is present."""
    if isinstance(data, bytes):
        data = data.decode("utf-8")
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise MalformedInstanceError(f"invalid JSON: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format") != FORMAT:
        raise MalformedInstanceError(f"missing or wrong format header (want {FORMAT!r})")
    try:
        n, k, family = doc["n"], doc["k"], doc["family"]
        entries = doc["constraints"]
    except KeyError as exc:
        raise MalformedInstanceError(f"missing header field {exc}") from None
    if not (isinstance(n, int) and isinstance(k, int)) or family not in FAMILIES:
        raise MalformedInstanceError("bad n, k or family")
    expected = math.comb(n, k)
    if len(entries) != expected:
        raise MalformedInstanceError(
            f"constraint count mismatch: expected {expected}, found {len(entries)}"
        )
    payload = {}
    for entry in entries:
        s = tuple(entry["s"])
        if s in payload:
            raise MalformedInstanceError(f"duplicate constraint {list(s)}")
        payload[s] = entry["d"]
    system = ConstraintSystem(n, k, family, payload)
    if "planted" not in doc:
        return system
    planted = Ranking(tuple(doc["planted"]))
    if sorted(planted.order) != list(range(n)):
        raise MalformedInstanceError("planted ranking must cover every vertex")
    return PlantedInstance(
        system,
        planted,
        Fraction(doc.get("noise", "0")),
        int(doc.get("noised_count", 0)),
        int(doc.get("seed", 0)),
    )


def load(path) -> ConstraintSystem | PlantedInstance:
    with open(path, "rb") as fh:
        return parse(fh.read())


def system_of(obj) -> ConstraintSystem:
    return obj.system if isinstance(obj, PlantedInstance) else obj
