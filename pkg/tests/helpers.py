from fractions import Fraction

from rankcsp.core import Ordering, Ranking


def random_ranking(vertices, rng):
    order = list(vertices)
    rng.shuffle(order)
    return Ranking(tuple(order))


def random_ordering(vertices, rng):
    """Injective ordering with random, distinct rational positions."""
    values = rng.sample(range(1000), len(vertices))
    return Ordering({v: Fraction(x, 7) for v, x in zip(vertices, values)})
