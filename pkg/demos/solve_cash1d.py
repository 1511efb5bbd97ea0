"""Solve the cash1d benchmark and compare each budget level against the
binomial-lattice oracle.

Run from the repository root:

    python demos/solve_cash1d.py [--paths 20000] [--steps 50] [--k-max 3]
"""

import argparse
import time
import warnings

import robust_impulse as ri
from robust_impulse.controls import TimeGrid
from robust_impulse.simulate import SimConfig
from robust_impulse.solver import (MonotonicityWarning, SolverConfig,
                                   extract_strategy, solve_robust)


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--paths", type=int, default=20_000)
    ap.add_argument("--steps", type=int, default=50)
    ap.add_argument("--k-max", type=int, default=3)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--tree-steps", type=int, default=200)
    args = ap.parse_args()

    spec = ri.cash1d()
    grid = TimeGrid(spec.horizon, args.steps)
    cfg = SolverConfig(sim=SimConfig(grid, args.paths, seed=args.seed,
                                     antithetic=True),
                       k_max=args.k_max)

    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", MonotonicityWarning)
        sol = solve_robust(spec, cfg)
    solve_s = time.perf_counter() - t0

    t0 = time.perf_counter()
    tree = ri.solve_tree(ri.tree_from_problem(spec, args.tree_steps,
                                              args.k_max))
    tree_s = time.perf_counter() - t0

    print(f"solver: {solve_s:.2f}s for {args.paths} paths x {args.steps} "
          f"steps; tree oracle: {tree_s:.2f}s at {args.tree_steps} steps\n")
    print(f"{'budget':>6} {'Y0 (regression)':>16} {'se':>9} "
          f"{'V_tree':>10} {'error':>9}")
    for lv in sol.levels:
        ref = tree.value_at_origin(lv.k)
        print(f"{lv.k:>6} {lv.y0:>16.4f} {lv.y0_se:>9.4f} "
              f"{ref:>10.4f} {lv.y0 - ref:>+9.4f}")
    for w in caught:
        print(f"\nnote: {w.message}")

    trace = extract_strategy(sol, SimConfig(grid, args.paths, seed=args.seed,
                                            antithetic=True, stream="eval"))
    print(f"\nextracted policy: E[N*] = {trace.n_impulses.mean():.3f}, "
          f"J-hat = {trace.j_mean:.4f} (se {trace.j_se:.4f})")
    print("The gap between Y0 and both the tree value and J-hat at budgets "
          ">= 2 is the\nknown bias of degree-2 value surfaces under the "
          "barrier max; see the README.")


if __name__ == "__main__":
    main()
