"""Shared fixtures: the reference acceptance-scale solve and tree values.

The expensive cash1d solve (M=50, P=2e4, k_max=3) and its binomial-tree
reference are session-scoped so the acceptance tests and the solver unit
tests share one run.
"""

import warnings

import numpy as np
import pytest

import robust_impulse as ri
from robust_impulse.simulate import SimConfig
from robust_impulse.solver import MonotonicityWarning, SolverConfig, solve_robust

ACCEPT_STEPS = 50
ACCEPT_PATHS = 20_000
ACCEPT_KMAX = 3
ACCEPT_SEED = 1
TREE_STEPS = 200


@pytest.fixture(scope="session")
def grid50():
    return ri.TimeGrid(1.0, ACCEPT_STEPS)


@pytest.fixture(scope="session")
def cash_spec():
    return ri.cash1d()


@pytest.fixture(scope="session")
def cash_solution(cash_spec, grid50):
    """Acceptance-scale solve of cash1d with the pinned configuration."""
    cfg = SolverConfig(
        sim=SimConfig(grid50, ACCEPT_PATHS, seed=ACCEPT_SEED, antithetic=True),
        k_max=ACCEPT_KMAX,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MonotonicityWarning)
        return solve_robust(cash_spec, cfg)


@pytest.fixture(scope="session")
def cash_tree(cash_spec):
    """Exact robust tree values V(0, x0, r) for cash1d at M_tree=200."""
    tree = ri.tree_from_problem(cash_spec, TREE_STEPS, ACCEPT_KMAX)
    return ri.solve_tree(tree)


def criterion_line(number: int, passed: bool, detail: str) -> str:
    status = "PASS" if passed else "FAIL"
    return f"criterion {number:2d}: {status}  {detail}"
