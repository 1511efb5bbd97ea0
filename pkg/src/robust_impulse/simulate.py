"""Euler-Maruyama simulation of the impulsively controlled state equation.

Two variants:

- ``simulate_driftless``: the controlled drift is absorbed into the BSDE
  driver, so paths carry only the uncontrolled drift block and the
  diffusion.  This batch feeds the backward solver.
- ``simulate_controlled``: the full drift with a per-step adversary
  action, used to evaluate a concrete (impulse, adversary) policy pair.

At a grid index holding an impulse the state is replaced by the impulse
map of the pre-impulse prefix before the diffusion step; simultaneous
impulses apply in list order.

Randomness is counter-based: path p of a named substream draws from a
Philox generator keyed by (seed, substream, p), so parallel and serial
generation orders produce identical batches.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .controls import EMPTY, ImpulseSequence, PathBatch, TimeGrid
from .errors import PolicyRange


@dataclass(frozen=True)
class SimConfig:
    grid: TimeGrid
    n_paths: int
    seed: int = 0
    antithetic: bool = False
    freeze_noise: bool = False  # zero increments, for deterministic skeletons
    stream: str = "forward"

    def __post_init__(self):
        if self.n_paths < 1:
            raise ValueError("n_paths must be positive")
        if self.antithetic and self.n_paths % 2:
            raise ValueError("n_paths must be even with antithetic sampling")


def _stream_id(name: str) -> int:
    return zlib.crc32(name.encode())


def brownian_increments(cfg: SimConfig, dim: int) -> np.ndarray:
    """Increments of shape (P, M, dim), each path on its own Philox stream."""
    P, M = cfg.n_paths, cfg.grid.steps
    if cfg.freeze_noise:
        return np.zeros((P, M, dim))
    sid = _stream_id(cfg.stream)
    scale = np.sqrt(cfg.grid.dt)
    out = np.empty((P, M, dim))
    base = P // 2 if cfg.antithetic else P
    for p in range(base):
        gen = np.random.Generator(
            np.random.Philox(key=cfg.seed, counter=[0, 0, sid, p])
        )
        draw = gen.standard_normal((M, dim)) * scale
        if cfg.antithetic:
            out[2 * p] = draw
            out[2 * p + 1] = -draw
        else:
            out[p] = draw
    return out


def _diffuse(sig, dW):
    sig = np.asarray(sig, dtype=float)
    if sig.ndim == 2:
        return dW @ sig.T
    return np.einsum("pij,pj->pi", sig, dW)


def _tilde_drift(spec, t, prefix):
    # uncontrolled drift (a_1, 0); the controlled block lives in the driver
    out = np.zeros((prefix.shape[0], spec.dim))
    if spec.d1 > 0 and spec.drift_a1 is not None:
        out[:, : spec.d1] = spec.drift_a1(t, prefix)
    return out


def _group_impulses(u: ImpulseSequence, grid: TimeGrid):
    by_index: dict[int, list] = {}
    for t, b in zip(u.times, u.marks):
        by_index.setdefault(grid.snap(t), []).append(np.asarray(b, dtype=float))
    return by_index


def simulate_driftless(spec, u: ImpulseSequence, cfg: SimConfig) -> PathBatch:
    """Paths of the driftless controlled SDE under the open-loop impulse
    sequence u (applied identically on every path, times snapped to the
    grid)."""
    if u.times and (min(u.times) < 0 or max(u.times) > spec.horizon):
        raise ValueError("impulse times must lie in [0, T]")
    grid, P, d = cfg.grid, cfg.n_paths, spec.dim
    dW = brownian_increments(cfg, d)
    impulses = _group_impulses(u, grid)
    pts = grid.points
    X = np.empty((P, grid.steps + 1, d))
    X[:, 0] = spec.x0
    for i in range(grid.steps + 1):
        t = pts[i]
        for b in impulses.get(i, ()):
            X[:, i] = spec.impulse_map(t, X[:, : i + 1], b)
        if i == grid.steps:
            break
        prefix = X[:, : i + 1]
        X[:, i + 1] = (
            X[:, i]
            + _tilde_drift(spec, t, prefix) * grid.dt
            + _diffuse(spec.sigma(t, prefix), dW[:, i])
        )
    return PathBatch(grid, X, dW, cfg.seed)


@dataclass
class StrategyTrace:
    """Realized interventions, adversary actions and reward decomposition
    of one evaluation sweep."""

    grid: TimeGrid
    impulse_steps: list  # per path: list of grid indices
    impulse_marks: list  # per path: list of mark arrays
    actions: np.ndarray  # (P, M, dA)
    running_reward: np.ndarray  # (P,)
    terminal_reward: np.ndarray  # (P,)
    total_cost: np.ndarray  # (P,)

    @property
    def n_impulses(self) -> np.ndarray:
        return np.array([len(s) for s in self.impulse_steps])

    @property
    def j_values(self) -> np.ndarray:
        return self.running_reward + self.terminal_reward - self.total_cost

    @property
    def j_mean(self) -> float:
        return float(np.mean(self.j_values))

    @property
    def j_se(self) -> float:
        j = self.j_values
        return float(np.std(j, ddof=1) / np.sqrt(len(j)))


def _check_in_set(points: np.ndarray, grid_set: np.ndarray, what: str):
    # every row of points must coincide with some row of grid_set
    if grid_set.shape[0] == 0:
        raise PolicyRange(f"{what} returned but the {what} set is empty")
    dist = np.min(
        np.max(np.abs(points[:, None, :] - grid_set[None, :, :]), axis=2), axis=1
    )
    bad = np.nonzero(dist > 1e-9)[0]
    if bad.size:
        raise PolicyRange(
            f"{what} {points[bad[0]]} not in the declared {what} set"
        )


def simulate_controlled(
    spec,
    impulse_policy: Optional[Callable],
    adversary_policy: Callable,
    cfg: SimConfig,
    budget: Optional[int] = None,
) -> tuple[PathBatch, StrategyTrace]:
    """Paths under the full controlled drift with closed-loop policies.

    ``adversary_policy(i, prefix, remaining) -> (P, dA)`` actions, rows of
    the action set.  ``impulse_policy(i, prefix, remaining) -> (mask, marks) | None``
    selects paths to hit at index i; it is re-invoked at the same index
    while it keeps returning a nonempty mask (chained impulses), up to the
    remaining budget.  Interventions are allowed at indices 0..M-1.
    """
    grid, P, d = cfg.grid, cfg.n_paths, spec.dim
    dW = brownian_increments(cfg, d)
    pts = grid.points
    X = np.empty((P, grid.steps + 1, d))
    X[:, 0] = spec.x0
    remaining = np.full(P, budget if budget is not None else np.iinfo(np.int64).max)

    dA = spec.action_set.shape[1]
    actions = np.zeros((P, grid.steps, dA))
    imp_steps = [[] for _ in range(P)]
    imp_marks = [[] for _ in range(P)]
    running = np.zeros(P)
    costs = np.zeros(P)

    max_passes = budget if budget is not None else 64
    for i in range(grid.steps):
        t = pts[i]
        if impulse_policy is not None:
            for _ in range(max_passes):
                decision = impulse_policy(i, X[:, : i + 1], remaining)
                if decision is None:
                    break
                mask, marks = decision
                mask = np.asarray(mask, bool) & (remaining > 0)
                if not mask.any():
                    break
                marks = np.atleast_2d(np.asarray(marks, dtype=float))
                if marks.shape[0] == 1:
                    marks = np.broadcast_to(marks, (P, marks.shape[1]))
                _check_in_set(marks[mask], spec.impulse_set, "mark")
                pre = X[:, i].copy()
                costs[mask] += spec.intervention_cost(t, pre, marks)[mask]
                shifted = np.empty((P, d))
                for b in np.unique(marks[mask], axis=0):
                    sel = mask & np.all(marks == b, axis=1)
                    shifted[sel] = spec.impulse_map(t, X[:, : i + 1], b)[sel]
                X[mask, i] = shifted[mask]
                remaining[mask] -= 1
                for p in np.nonzero(mask)[0]:
                    imp_steps[p].append(i)
                    imp_marks[p].append(marks[p].copy())
        prefix = X[:, : i + 1]
        alpha = np.atleast_2d(
            np.asarray(adversary_policy(i, prefix, remaining), dtype=float)
        )
        if alpha.shape[0] == 1:
            alpha = np.broadcast_to(alpha, (P, dA))
        _check_in_set(alpha, spec.action_set, "action")
        actions[:, i] = alpha
        running += spec.running_reward(t, prefix, alpha) * grid.dt
        drift = _tilde_drift(spec, t, prefix).copy()
        drift[:, spec.d1 :] += spec.drift_a2(t, prefix, alpha)
        X[:, i + 1] = X[:, i] + drift * grid.dt + _diffuse(spec.sigma(t, prefix), dW[:, i])
    terminal = spec.terminal_reward(X[:, -1])
    batch = PathBatch(grid, X, dW, cfg.seed)
    trace = StrategyTrace(grid, imp_steps, imp_marks, actions, running, terminal, costs)
    return batch, trace


def no_impulses(i, prefix, remaining):
    return None


def constant_adversary(action):
    """Adversary playing a fixed action at every step."""
    act = np.atleast_1d(np.asarray(action, dtype=float))

    def policy(i, prefix, remaining):
        return act[None, :]

    return policy


def fixed_sequence_policy(u: ImpulseSequence, grid: TimeGrid):
    """Open-loop impulse policy applying the same sequence on all paths."""
    by_index = _group_impulses(u, grid)
    consumed: dict[int, int] = {}

    def policy(i, prefix, remaining):
        marks = by_index.get(i, ())
        pos = consumed.get(i, 0)
        if pos >= len(marks):
            return None
        consumed[i] = pos + 1
        b = marks[pos]
        P = prefix.shape[0]
        return np.ones(P, bool), np.broadcast_to(b, (P, b.shape[0]))

    return policy
