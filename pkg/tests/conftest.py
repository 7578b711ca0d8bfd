from fractions import Fraction

import numpy as np
import pytest

from gpsens import DgpSpec, DiscreteDist, make_folds, simulate


@pytest.fixture(scope="session")
def motivating20k():
    return simulate(DgpSpec("motivating", n=20000, seed=11))


@pytest.fixture(scope="session")
def continuous20k():
    return simulate(DgpSpec("continuous-custom", n=20000, seed=11))


@pytest.fixture(scope="session")
def plan20k(motivating20k):
    return make_folds(motivating20k.n, 5, seed=3)


def random_rational_law(rng: np.random.Generator, max_support: int = 6,
                        max_weight: int = 20,
                        support_pool=tuple(range(9))) -> DiscreteDist:
    """Law with integer support and exact rational masses (denominator <= 120)."""
    size = int(rng.integers(2, max_support + 1))
    support = sorted(rng.choice(support_pool, size=size, replace=False).tolist())
    weights = rng.integers(1, max_weight + 1, size=size)
    total = int(weights.sum())
    return DiscreteDist(tuple(int(s) for s in support),
                        tuple(Fraction(int(w), total) for w in weights))


def rational_pair(rng: np.random.Generator, max_support: int = 6):
    """(pi, q) on a shared support so either law can absolutely dominate."""
    size = int(rng.integers(2, max_support + 1))
    support = tuple(sorted(rng.choice(range(9), size=size, replace=False).tolist()))
    laws = []
    for _ in range(2):
        weights = rng.integers(1, 21, size=size)
        total = int(weights.sum())
        laws.append(DiscreteDist(tuple(int(s) for s in support),
                                 tuple(Fraction(int(w), total) for w in weights)))
    return laws[0], laws[1]
