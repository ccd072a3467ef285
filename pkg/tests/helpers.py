"""Shared test fixtures: seeded instance generators and fast solver options."""

import numpy as np

import ctrules as ct

FAST = ct.SolverOptions(restarts=1)


def dirichlet_profile(seed: int, n: int, m: int, conc: float = 1.0) -> ct.Profile:
    rng = np.random.default_rng(seed)
    return ct.Profile(rng.dirichlet(np.full(m, conc), size=n))


def single_minded_profile(seed: int, n: int, m: int) -> ct.Profile:
    rng = np.random.default_rng(seed)
    rows = np.zeros((n, m))
    rows[np.arange(n), rng.integers(0, m, size=n)] = 1.0
    return ct.Profile(rows)


def two_group_profile(s1: int, s2: int) -> ct.Profile:
    rows = [[1.0, 0.0]] * s1 + [[0.0, 1.0]] * s2
    return ct.Profile(rows)


def core_example_profile() -> ct.Profile:
    """Three homogeneous groups of sizes 3/3/4 over three alternatives."""
    rows = [[1.0, 0.0, 0.0]] * 3 + [[0.5, 0.5, 0.0]] * 3 + [[0.0, 0.0, 1.0]] * 4
    return ct.Profile(rows)


def sp_example_profile() -> ct.Profile:
    """Two agents, two alternatives: the canonical manipulation instance."""
    return ct.Profile([[0.5, 0.5], [0.0, 1.0]])


def random_allocation(seed: int, m: int) -> ct.Allocation:
    rng = np.random.default_rng(seed)
    return ct.Allocation(rng.dirichlet(np.ones(m)))
