"""Binomial-lattice oracle: exact identities and stability."""

import numpy as np
import pytest

import robust_impulse as ri
from robust_impulse.errors import OffTreeImpulse, ProbabilityOutOfRange
from robust_impulse.tree import (TreeSpec, oracle_values, solve_tree,
                                 tree_from_problem)


def _plain_tree(**kw):
    base = dict(
        steps=50, horizon=1.0, x0=1.0, sigma=0.2,
        actions=(0.0,), marks=(),
        phi=lambda t, x, a: 0.0, psi=lambda x: x,
        ell=lambda t, x, b: 1.0, gamma=lambda t, x, b: x,
        k_max=0,
    )
    base.update(kw)
    return TreeSpec(**base)


class TestMartingaleTree:
    def test_value_is_x0_exactly(self):
        sol = solve_tree(_plain_tree())
        assert sol.value_at_origin(0) == pytest.approx(1.0, abs=1e-12)

    def test_terminal_layer_is_psi(self):
        sol = solve_tree(_plain_tree())
        x = 1.0 + sol.offsets * sol.spec.increment
        assert np.allclose(sol.values[-1, :, 0], x)


class TestRobustRecursion:
    def test_budget_monotone_exact(self):
        sol = solve_tree(tree_from_problem(ri.cash1d(), 100, 3))
        V = sol.values
        assert np.all(V[:, :, 1:] >= V[:, :, :-1])

    def test_huge_cost_freezes_budgets(self):
        spec = ri.cash1d(cost_scale=1e6)
        sol = solve_tree(tree_from_problem(spec, 60, 3))
        for r in range(1, 4):
            assert np.array_equal(sol.values[:, :, r], sol.values[:, :, 0])

    def test_larger_adversary_set_never_helps(self):
        small = solve_tree(tree_from_problem(ri.cash1d(a_max=0.0), 100, 2))
        large = solve_tree(tree_from_problem(ri.cash1d(a_max=0.1), 100, 2))
        for r in range(3):
            assert large.value_at_origin(r) <= small.value_at_origin(r) + 1e-12

    def test_refinement_stability(self):
        spec = ri.cash1d()
        a = solve_tree(tree_from_problem(spec, 200, 3)).value_at_origin(3)
        b = solve_tree(tree_from_problem(spec, 400, 3)).value_at_origin(3)
        assert abs(a - b) <= 0.005 * abs(a)

    def test_impulse_improves_from_bad_state(self):
        # with x0 = 1 and quadratic penalties an impulse toward 0 pays off
        sol = solve_tree(tree_from_problem(ri.cash1d(), 100, 1))
        assert sol.value_at_origin(1) > sol.value_at_origin(0) + 0.5

    def test_oracle_values_rows(self):
        sol = solve_tree(tree_from_problem(ri.cash1d(), 50, 2))
        rows = oracle_values(sol)
        assert [r for r, _ in rows] == [0, 1, 2]
        assert rows[0][1] == sol.value_at_origin(0)


class TestErrors:
    def test_probability_out_of_range(self):
        ts = _plain_tree(steps=2, actions=(0.3,))
        with pytest.raises(ProbabilityOutOfRange):
            solve_tree(ts)

    def test_off_tree_impulse(self):
        ts = _plain_tree(
            steps=4, marks=(50.0,), k_max=1,
            gamma=lambda t, x, b: x + b, extra_span=0.0,
        )
        with pytest.raises(OffTreeImpulse):
            solve_tree(ts)

    def test_non_markov_problem_rejected(self):
        with pytest.raises(ValueError):
            tree_from_problem(ri.pathdep1d(), 50, 1)

    def test_empty_action_set_rejected(self):
        with pytest.raises(ValueError):
            solve_tree(_plain_tree(actions=()))


class TestLattice:
    def test_recombining_states(self):
        ts = _plain_tree(steps=9)
        sol = solve_tree(ts)
        x = ts.x0 + sol.offsets * ts.increment
        assert np.allclose(np.diff(x), ts.increment)

    def test_widened_for_impulses(self):
        spec = ri.cash1d()
        ts = tree_from_problem(spec, 60, 2)
        assert ts.extra_span >= spec.gamma_bound
        sol = solve_tree(ts)  # in-range targets never fall off
        assert sol.values.shape[1] == len(sol.offsets)
