"""Acceptance suite: one test per criterion, each printing one line.

Criteria 1, 5 and 8 currently fail; the backward Y0 at Picard levels two
and above carries a large upward bias because the degree-2 value surfaces
cannot represent the level values at the impulse-shifted query states.
The tests state the criteria as specified and are expected to stay red
until the surface representation is generalized; see the repository
notes for the quantitative analysis.
"""

import json
import warnings

import numpy as np
import pytest

import robust_impulse as ri
from robust_impulse.harness import RunConfig, estimate_J, run
from robust_impulse.simulate import (SimConfig, _stream_id, brownian_increments,
                                     simulate_driftless)
from robust_impulse.solver import (MonotonicityWarning, SolverConfig, dual_check,
                                   extract_strategy, impulse_policy_from_solution,
                                   adversary_from_solution, random_feasible_sequences,
                                   solve_robust)
from robust_impulse.bsde import BackwardConfig, solve_bsde
from robust_impulse.controls import EMPTY

from conftest import (ACCEPT_KMAX, ACCEPT_PATHS, ACCEPT_SEED, ACCEPT_STEPS,
                      criterion_line)


def test_criterion_01_oracle_match(cash_solution, cash_tree):
    """Robust impulse value on cash1d vs the exact tree at budget 3."""
    y0 = cash_solution.y0
    v_tree = cash_tree.value_at_origin(ACCEPT_KMAX)
    tol = max(0.05 * abs(v_tree), 0.02)
    err = abs(y0 - v_tree)
    ok = err <= tol
    print(criterion_line(1, ok, f"|y0 - V_tree| = |{y0:.4f} - {v_tree:.4f}| "
                                f"= {err:.4f} (tol {tol:.4f})"))
    assert ok, f"oracle mismatch: y0={y0:.4f}, V_tree={v_tree:.4f}, tol={tol:.4f}"


def test_criterion_02_martingale_sanity(grid50):
    """mart1d, zero driver, no impulses: Y0 = x0 and fitted Z = sigma."""
    spec = ri.mart1d()
    cfg = SimConfig(grid50, ACCEPT_PATHS, seed=ACCEPT_SEED, antithetic=True)
    batch = simulate_driftless(spec, EMPTY, cfg)
    state = solve_bsde(
        batch, ri.markov_featurizer(1),
        lambda i, prefix, y, z: np.zeros(prefix.shape[0]),
        spec.terminal_reward(batch.states[:, -1]), BackwardConfig(),
    )
    sigma = spec.markov.sigma
    x0 = float(spec.x0[0])
    err_y = abs(state.y0 - x0)
    mean_z = float(np.mean(state.Z))
    err_z = abs(mean_z - sigma)
    ok = err_y <= 3 * state.y0_se and err_z <= 0.05 * sigma
    print(criterion_line(2, ok, f"|y0 - x0| = {err_y:.2e} (3SE {3*state.y0_se:.2e}), "
                                f"mean Z = {mean_z:.4f} (sigma {sigma})"))
    assert err_y <= 3 * state.y0_se
    assert err_z <= 0.05 * sigma


def test_criterion_03_picard_monotonicity(cash_solution):
    """Y0(k) nondecreasing in k up to tol_mono."""
    y0s = [lv.y0 for lv in cash_solution.levels]
    tol = 1e-3 * (1.0 + abs(cash_solution.y0))
    increments = np.diff(y0s)
    ok = bool(np.all(increments >= -tol))
    print(criterion_line(3, ok, f"Y0 by level {[round(v, 4) for v in y0s]}, "
                                f"min increment {increments.min():.4f} (tol -{tol:.4f})"))
    assert ok


def test_criterion_04_discrete_skorokhod(cash_solution):
    """K > 0 implies Y equals the barrier bit-exactly; sum (Y-S) dK = 0."""
    worst_gap = 0.0
    total = 0.0
    checked = 0
    for lv in cash_solution.levels[1:]:
        st = lv.backward
        S = st.barrier_values
        binding = st.K_increments > 0
        checked += int(np.count_nonzero(binding))
        gaps = st.Y[:, :-1][binding] - S[binding]
        if gaps.size:
            worst_gap = max(worst_gap, float(np.max(np.abs(gaps))))
        finite = np.isfinite(S)
        total += float(np.sum((st.Y[:, :-1][finite] - S[finite])
                              * st.K_increments[finite]))
    ok = worst_gap == 0.0 and total == 0.0
    print(criterion_line(4, ok, f"{checked} binding path-steps, max |Y - S| = "
                                f"{worst_gap!r}, sum (Y-S)dK = {total!r}"))
    assert worst_gap == 0.0
    assert total == 0.0


def test_criterion_05_primal_dual_consistency(cash_solution, grid50):
    """J(u*, alpha*) from the extracted pair equals Y0 within 3 SE."""
    eval_cfg = SimConfig(grid50, ACCEPT_PATHS, seed=ACCEPT_SEED,
                         antithetic=True, stream="eval")
    j_hat, j_se = estimate_J(
        cash_solution.spec,
        impulse_policy_from_solution(cash_solution),
        adversary_from_solution(cash_solution),
        eval_cfg, budget=cash_solution.k_used,
    )
    gap = abs(j_hat - cash_solution.y0)
    slack = 3 * float(np.hypot(j_se, cash_solution.y0_se))
    ok = gap <= slack
    print(criterion_line(5, ok, f"|J_hat - Y0| = |{j_hat:.4f} - "
                                f"{cash_solution.y0:.4f}| = {gap:.4f} (3SE {slack:.4f})"))
    assert ok, f"primal-dual gap {gap:.4f} exceeds {slack:.4f}"


def test_criterion_06_dual_bound_sweep(cash_solution, grid50):
    """100 random feasible impulse policies never beat Y0 beyond 3 SE."""
    candidates = random_feasible_sequences(cash_solution.spec, 100,
                                           ACCEPT_KMAX, seed=11)
    dual_cfg = SimConfig(grid50, 2_000, seed=ACCEPT_SEED, antithetic=True,
                         stream="dual")
    report = dual_check(cash_solution, candidates, dual_cfg)
    n_bad = len(report.violations)
    ok = n_bad == 0
    print(criterion_line(6, ok, f"max J over 100 candidates = {report.max_j:.4f}, "
                                f"Y0 = {report.y0:.4f}, violations = {n_bad}"))
    assert ok


def test_criterion_07_hamiltonian_closed_form(cash_spec):
    """H*(z) = -(a_max/sigma)|z| + phi exactly; deterministic tie-break."""
    rng = np.random.Generator(np.random.Philox(key=3))
    P = 1_000
    z = rng.standard_normal((P, 1)) * 3.0
    x = rng.uniform(-2.0, 2.0, size=(P, 1, 1))
    a_max, sigma = 0.1, cash_spec.markov.sigma
    phi = -x[:, 0, 0] ** 2
    expected = -(a_max / sigma) * np.abs(z[:, 0]) + phi
    ev1 = ri.minimize_hamiltonian(cash_spec, 0.3, x, z)
    ev2 = ri.minimize_hamiltonian(cash_spec, 0.3, x, z)
    exact = bool(np.array_equal(ev1.value, expected))
    same_argmin = bool(np.array_equal(ev1.minimizer_index, ev2.minimizer_index))
    zero = ri.minimize_hamiltonian(cash_spec, 0.3, x[:1], np.zeros((1, 1)))
    tie_det = int(zero.minimizer_index[0]) == 0
    ok = exact and same_argmin and tie_det
    print(criterion_line(7, ok, f"closed form exact on {P} draws: {exact}, "
                                f"argmin reproducible: {same_argmin}, "
                                f"tie at z=0 -> index {int(zero.minimizer_index[0])}"))
    assert ok


def test_criterion_08_robustness_ordering(cash_solution, grid50):
    """Removing the adversary (A = {0}) never lowers the value."""
    spec0 = ri.cash1d(a_max=0.0)
    cfg = SolverConfig(
        sim=SimConfig(grid50, ACCEPT_PATHS, seed=ACCEPT_SEED, antithetic=True),
        k_max=ACCEPT_KMAX,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MonotonicityWarning)
        sol0 = solve_robust(spec0, cfg)
    slack = 3 * float(np.hypot(sol0.y0_se, cash_solution.y0_se))
    diff = sol0.y0 - cash_solution.y0
    ok = diff >= -slack
    print(criterion_line(8, ok, f"Y0(A={{0}}) - Y0(full A) = {sol0.y0:.4f} - "
                                f"{cash_solution.y0:.4f} = {diff:.4f} (3SE {slack:.4f})"))
    assert ok, f"robustness ordering violated by {diff:.4f} (slack {slack:.4f})"


def test_criterion_09_determinism(tmp_path):
    """Identical config and seed give byte-identical reports; stream order
    does not affect Y0."""
    cfg = RunConfig(problem="cash1d", steps=25, paths=2_000, seed=5,
                    k_max=2, deterministic=True)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MonotonicityWarning)
        run(cfg, out_dir=tmp_path / "a")
        run(cfg, out_dir=tmp_path / "b")
    bytes_a = (tmp_path / "a" / "report.json").read_bytes()
    bytes_b = (tmp_path / "b" / "report.json").read_bytes()
    identical = bytes_a == bytes_b

    # counter-based streams: regenerating the batch path-by-path in reverse
    # order reproduces the increments bit-exactly, so Y0 cannot depend on
    # scheduling order
    spec = ri.mart1d()
    grid = ri.TimeGrid(1.0, 25)
    sim = SimConfig(grid, 2_000, seed=5, antithetic=False)
    dw = brownian_increments(sim, spec.dim)
    scale = np.sqrt(grid.dt)
    dw_rev = np.empty_like(dw)
    for p in reversed(range(sim.n_paths)):
        gen = np.random.Generator(
            np.random.Philox(key=sim.seed, counter=[0, 0, _stream_id(sim.stream), p])
        )
        dw_rev[p] = gen.standard_normal((grid.steps, spec.dim)) * scale
    order_free = bool(np.array_equal(dw, dw_rev))

    ok = identical and order_free
    print(criterion_line(9, ok, f"report.json byte-identical: {identical}, "
                                f"stream order-independent: {order_free}"))
    assert ok


def test_criterion_10_budget_finiteness(cash_solution, grid50):
    """E[N*] finite and logged; scaling the cost by 1e6 kills all impulses."""
    eval_cfg = SimConfig(grid50, 4_000, seed=ACCEPT_SEED, antithetic=True,
                         stream="eval")
    trace = extract_strategy(cash_solution, eval_cfg)
    e_n = float(np.mean(trace.n_impulses))

    spec_big = ri.cash1d(cost_scale=1e6)
    cfg = SolverConfig(
        sim=SimConfig(grid50, 2_000, seed=ACCEPT_SEED, antithetic=True),
        k_max=ACCEPT_KMAX,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", MonotonicityWarning)
        sol_big = solve_robust(spec_big, cfg)
    trace_big = extract_strategy(
        sol_big, SimConfig(grid50, 2_000, seed=ACCEPT_SEED, antithetic=True,
                           stream="eval"))
    e_n_big = float(np.mean(trace_big.n_impulses))
    ok = np.isfinite(e_n) and e_n_big == 0.0
    print(criterion_line(10, ok, f"E[N*] = {e_n:.3f} (finite), "
                                 f"E[N*] with cost x1e6 = {e_n_big!r}"))
    assert np.isfinite(e_n)
    assert e_n_big == 0.0
