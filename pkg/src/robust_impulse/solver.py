"""Iterated optimal stopping for the robust impulse control problem.

Level 0 solves the non-reflected BSDE whose driver is the minimized
Hamiltonian; level k >= 1 solves the reflected BSDE whose barrier is the
best post-impulse evaluation of the level k-1 value surface minus the
intervention cost.  Levels increase monotonically (up to Monte Carlo and
regression noise) toward the value of the game with unlimited
interventions; the level index doubles as the remaining-impulse budget
during strategy extraction.

The value processes are indexed in the continuous theory by whole impulse
histories; here that index is collapsed to (remaining budget, path
features).  This is the solver's principal approximation and is surfaced
in reports.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from .bsde import BackwardConfig, BackwardState, solve_bsde, solve_reflected
from .controls import EMPTY, ImpulseSequence, TimeGrid
from .hamiltonian import minimize_hamiltonian
from .problems import ProblemSpec
from .regression import FEATURIZERS, Featurizer, ValueSurface, markov_featurizer
from .simulate import (SimConfig, StrategyTrace, fixed_sequence_policy,
                       simulate_controlled, simulate_driftless)


class MonotonicityWarning(UserWarning):
    """Picard level decreased by more than the monotonicity tolerance."""


@dataclass(frozen=True)
class SolverConfig:
    sim: SimConfig
    k_max: int = 5
    degree: int = 2
    ridge: Optional[float] = None
    f_cap: Optional[float] = None
    eps_picard: Optional[float] = None  # default 5e-3 * (1 + |Y0|)
    tol_mono: Optional[float] = None  # default 1e-3 * (1 + |Y0|)
    tol_hit: Optional[float] = None  # default 1e-9 * (1 + |Y0|)

    def __post_init__(self):
        if self.k_max < 0:
            raise ValueError("k_max must be nonnegative")

    def backward(self) -> BackwardConfig:
        return BackwardConfig(degree=self.degree, ridge=self.ridge,
                              f_cap=self.f_cap)


@dataclass
class PicardLevel:
    k: int
    backward: BackwardState
    sup_increment: float  # sample sup of Y^k - Y^{k-1}; nan at level 0
    mean_increment: float
    min_increment: float
    binding_fraction: np.ndarray  # per-step fraction of paths at the barrier

    @property
    def y0(self) -> float:
        return self.backward.y0

    @property
    def y0_se(self) -> float:
        return self.backward.y0_se


@dataclass
class RobustSolution:
    spec: ProblemSpec
    config: SolverConfig
    featurizer: Featurizer
    levels: list  # PicardLevel, level index = remaining budget
    batch_seed: int

    @property
    def k_used(self) -> int:
        return len(self.levels) - 1

    @property
    def y0(self) -> float:
        return self.levels[-1].y0

    @property
    def y0_se(self) -> float:
        return self.levels[-1].y0_se

    def tol_hit(self) -> float:
        cfg = self.config.tol_hit
        return cfg if cfg is not None else 1e-9 * (1.0 + abs(self.y0))


def hamiltonian_driver(spec: ProblemSpec, grid: TimeGrid) -> Callable:
    """BSDE driver: the Hamiltonian minimized exactly over the action grid."""
    dt = grid.dt

    def driver(i, prefix, y, z):
        return minimize_hamiltonian(spec, i * dt, prefix, z).value

    return driver


def barrier_values(spec: ProblemSpec, grid: TimeGrid, featurizer: Featurizer,
                   prev_surface: ValueSurface, i: int, prefix: np.ndarray,
                   with_argmax: bool = False):
    """Intervention barrier at step i from the previous level's surface:
    max over marks of (surface at the impulse-shifted feature) minus the
    intervention cost.  None when the mark set is empty or at the horizon
    (no intervention at the terminal date).  Ties go to the smallest mark
    index."""
    if spec.n_marks == 0 or i == grid.steps:
        return (None, None) if with_argmax else None
    t = i * grid.dt
    x = prefix[:, -1]
    best = None
    best_idx = None
    for j, b in enumerate(spec.impulse_set):
        shifted = spec.impulse_map(t, prefix, b)
        feats = featurizer.shifted(i, prefix, shifted)
        val = prev_surface.evaluate(i, feats) - spec.intervention_cost(t, x, b)
        if best is None:
            best = val
            best_idx = np.zeros(val.shape[0], dtype=int)
        else:
            better = val > best  # strict: ties keep the earlier mark
            best = np.where(better, val, best)
            best_idx = np.where(better, j, best_idx)
    if with_argmax:
        return best, best_idx
    return best


def solve_robust(spec: ProblemSpec, cfg: SolverConfig,
                 featurizer: Optional[Featurizer] = None) -> RobustSolution:
    """Run the full Picard sequence of backward passes on one shared
    driftless path batch (common random numbers across levels)."""
    feat = featurizer if featurizer is not None else markov_featurizer(spec.dim)
    grid = cfg.sim.grid
    batch = simulate_driftless(spec, EMPTY, cfg.sim)
    terminal = spec.terminal_reward(batch.states[:, -1])
    driver = hamiltonian_driver(spec, grid)
    bcfg = cfg.backward()

    level0 = solve_bsde(batch, feat, driver, terminal, bcfg)
    levels = [PicardLevel(0, level0, float("nan"), float("nan"), float("nan"),
                          np.zeros(grid.steps))]
    eps = (cfg.eps_picard if cfg.eps_picard is not None
           else 5e-3 * (1.0 + abs(level0.y0)))
    tol_mono = (cfg.tol_mono if cfg.tol_mono is not None
                else 1e-3 * (1.0 + abs(level0.y0)))

    small_streak = 0
    for k in range(1, cfg.k_max + 1):
        prev = levels[-1].backward

        def barrier(i, prefix, _surf=prev.y_surface):
            return barrier_values(spec, grid, feat, _surf, i, prefix)

        lvl = solve_reflected(batch, feat, driver, terminal, barrier, bcfg)
        diff = lvl.Y - prev.Y
        sup_inc = float(np.max(diff))
        mean_inc = float(np.mean(diff))
        min_inc = float(np.min(diff))
        if min_inc < -tol_mono:
            warnings.warn(
                f"level {k} decreased by {-min_inc:.3g} > tol_mono {tol_mono:.3g}",
                MonotonicityWarning,
            )
        binding = np.mean(lvl.K_increments > 0, axis=0)
        levels.append(PicardLevel(k, lvl, sup_inc, mean_inc, min_inc, binding))
        small_streak = small_streak + 1 if sup_inc <= eps else 0
        if small_streak >= 2:
            break
        if spec.n_marks == 0:
            break  # reflection can never bind; further levels are identical
    return RobustSolution(spec, cfg, feat, levels, cfg.sim.seed)


# ---------------------------------------------------------------------------
# Strategy extraction and evaluation
# ---------------------------------------------------------------------------


def _continuation(sol: RobustSolution, level: int, i: int,
                  prefix: np.ndarray) -> np.ndarray:
    """Continuation value C + H* dt of a level at a fresh state."""
    lv = sol.levels[level].backward
    grid = sol.config.sim.grid
    feats = sol.featurizer(i, prefix)
    C = lv.c_surface.evaluate(i, feats)
    z = lv.z_surface.evaluate(i, feats)
    f = minimize_hamiltonian(sol.spec, i * grid.dt, prefix, z).value
    return C + f * grid.dt


def impulse_policy_from_solution(sol: RobustSolution) -> Callable:
    """Intervene when the current level's continuation value drops to the
    intervention barrier built from the level below; the mark is the
    barrier's argmax."""
    spec, grid, feat = sol.spec, sol.config.sim.grid, sol.featurizer
    tol = sol.tol_hit()

    def policy(i, prefix, remaining):
        if spec.n_marks == 0 or i >= grid.steps:
            return None
        P = prefix.shape[0]
        mask = np.zeros(P, dtype=bool)
        marks = np.zeros((P, spec.impulse_set.shape[1]))
        for r in np.unique(remaining):
            r = int(min(r, sol.k_used))
            if r < 1:
                continue
            sel = np.minimum(remaining, sol.k_used) == r
            cont = _continuation(sol, r, i, prefix)
            prev_surf = sol.levels[r - 1].backward.y_surface
            bar, bidx = barrier_values(spec, grid, feat, prev_surf, i, prefix,
                                       with_argmax=True)
            hit = sel & (cont <= bar + tol)
            mask |= hit
            marks[hit] = spec.impulse_set[bidx[hit]]
        if not mask.any():
            return None
        return mask, marks

    return policy


def adversary_from_solution(sol: RobustSolution) -> Callable:
    """Worst-case action from the stored Z surface of the level matching
    the remaining budget."""
    spec, grid = sol.spec, sol.config.sim.grid

    def policy(i, prefix, remaining):
        P = prefix.shape[0]
        feats = sol.featurizer(i, prefix)
        levels = np.minimum(remaining, sol.k_used).astype(int)
        out = np.empty((P, spec.action_set.shape[1]))
        for r in np.unique(levels):
            sel = levels == r
            z = sol.levels[int(r)].backward.z_surface.evaluate(i, feats)
            ev = minimize_hamiltonian(spec, i * grid.dt, prefix, z)
            out[sel] = ev.minimizer[sel]
        return out

    return policy


def extract_strategy(sol: RobustSolution, eval_cfg: SimConfig) -> StrategyTrace:
    """Fresh forward sweep under the extracted pair: hitting-time impulses
    with argmax marks, Hamiltonian-minimizing adversary."""
    _, trace = simulate_controlled(
        sol.spec,
        impulse_policy_from_solution(sol),
        adversary_from_solution(sol),
        eval_cfg,
        budget=sol.k_used,
    )
    return trace


def intervention_count_bound(sol: RobustSolution) -> float:
    """Crude per-run bound on the mean number of interventions implied by
    the strictly positive cost floor."""
    last = sol.levels[-1].backward
    return (float(np.max(np.abs(last.Y))) +
            float(np.max(np.abs(last.Y[:, -1])))) / sol.spec.cost_floor


@dataclass
class DualEntry:
    label: str
    j_mean: float
    j_se: float
    n_impulses_mean: float


@dataclass
class DualReport:
    y0: float
    y0_se: float
    entries: list
    tolerance_se: float = 3.0

    @property
    def max_j(self) -> float:
        return max(e.j_mean for e in self.entries)

    @property
    def gap(self) -> float:
        return self.y0 - self.max_j

    @property
    def violations(self) -> list:
        out = []
        for e in self.entries:
            slack = self.tolerance_se * np.hypot(e.j_se, self.y0_se)
            if e.j_mean > self.y0 + slack:
                out.append(e)
        return out


def dual_check(sol: RobustSolution, candidates: Sequence, eval_cfg: SimConfig
               ) -> DualReport:
    """Upper-bound check: no feasible impulse policy, played against the
    extracted adversary response, should beat Y0 beyond noise.

    Candidates are ImpulseSequences (applied open loop) or
    (label, policy, budget) triples.
    """
    adversary = adversary_from_solution(sol)
    grid = eval_cfg.grid
    entries = []
    for idx, cand in enumerate(candidates):
        if isinstance(cand, ImpulseSequence):
            label = f"seq{idx}"
            policy = fixed_sequence_policy(cand, grid)
            budget = len(cand)
        else:
            label, policy, budget = cand
        _, trace = simulate_controlled(sol.spec, policy, adversary, eval_cfg,
                                       budget=budget)
        entries.append(DualEntry(label, trace.j_mean, trace.j_se,
                                 float(np.mean(trace.n_impulses))))
    return DualReport(sol.y0, sol.y0_se, entries)


def random_feasible_sequences(spec: ProblemSpec, n: int, max_impulses: int,
                              seed: int) -> list:
    """Random open-loop impulse sequences with at most max_impulses
    interventions, for dual-bound sweeps."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    out = []
    for _ in range(n):
        m = int(rng.integers(0, max_impulses + 1))
        times = np.sort(rng.uniform(0.0, spec.horizon, size=m))
        marks = spec.impulse_set[rng.integers(0, spec.n_marks, size=m)]
        out.append(ImpulseSequence(tuple(times), tuple(tuple(b) for b in marks)))
    return out
