from pathlib import Path

import numpy as np
import pytest

from rosslab.ctmc import Ctmc

CHAINS = Path(__file__).resolve().parent.parent / "chains"


def random_generator(rng, m, low=0.1, high=2.0, density=1.0):
    R = rng.uniform(low, high, size=(m, m)) * (rng.random((m, m)) < density)
    # a cycle keeps every sample irreducible
    for i in range(m):
        R[i, (i + 1) % m] = max(R[i, (i + 1) % m], low)
    np.fill_diagonal(R, 0.0)
    np.fill_diagonal(R, -R.sum(axis=1))
    return R


def random_chain(rng, m=None, lam_max=1.0):
    m = m or int(rng.integers(2, 5))
    return Ctmc(random_generator(rng, m, density=0.7), np.sort(rng.uniform(0, lam_max, m)))


def two_state(a, b, lam=(0.5, 1.5)):
    return Ctmc([[-a, a], [b, -b]], lam)


def birth_death(up, down, lam):
    m = len(lam)
    Q = np.zeros((m, m))
    for i in range(m - 1):
        Q[i, i + 1] = up[i]
        Q[i + 1, i] = down[i]
    np.fill_diagonal(Q, -Q.sum(axis=1))
    return Ctmc(Q, lam)


@pytest.fixture
def rng():
    return np.random.default_rng(20220207)


@pytest.fixture
def chains_dir():
    return CHAINS
