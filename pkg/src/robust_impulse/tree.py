"""Exact robust impulse dynamic programming on a binomial lattice.

Independent ground truth for 1-d Markovian instances with finite action
and mark grids.  The lattice is driftless; the adversary acts by tilting
the up-probability, p_alpha = (1 + (alpha/sigma) sqrt(dt)) / 2, the
discrete analogue of absorbing the controlled drift into a change of
measure.  Budget-indexed values V(i, node, r) satisfy

  C(i, x, r) = min_alpha [ phi(t_i, x, alpha) dt
                           + p_alpha V(i+1, up, r) + (1 - p_alpha) V(i+1, down, r) ]
  V(i, x, 0) = C(i, x, 0)
  V(i, x, r) = max(C(i, x, r),
                   max_b [ V(i, node(Gamma(t_i, x, b)), r-1) - ell(t_i, x, b) ])

with V(M, x, r) = psi(x).  Inner budgets are evaluated in increasing r so
chained same-time impulses resolve.  Impulse targets snap to the nearest
lattice node; the lattice is widened at construction so in-range targets
never fall off.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import OffTreeImpulse, ProbabilityOutOfRange
from .problems import ProblemSpec


@dataclass(frozen=True)
class TreeSpec:
    steps: int
    horizon: float
    x0: float
    sigma: float
    actions: tuple
    marks: tuple
    phi: Callable[[float, float, float], float]
    psi: Callable[[float], float]
    ell: Callable[[float, float, float], float]
    gamma: Callable[[float, float, float], float]
    k_max: int
    extra_span: float = 0.0  # widen the lattice beyond the diffusion range

    @property
    def dt(self) -> float:
        return self.horizon / self.steps

    @property
    def increment(self) -> float:
        return self.sigma * math.sqrt(self.dt)


@dataclass(frozen=True)
class TreeSolution:
    spec: TreeSpec
    offsets: np.ndarray  # lattice offsets m; node state = x0 + m h
    values: np.ndarray  # (M+1, n_nodes, k_max+1)

    def value_at_origin(self, budget: int) -> float:
        m0 = int(np.searchsorted(self.offsets, 0))
        return float(self.values[0, m0, budget])


def tree_from_problem(spec: ProblemSpec, steps: int, k_max: int,
                      extra_span: float = 0.0) -> TreeSpec:
    """Markovian scalar restriction of a built-in problem."""
    if spec.markov is None:
        raise ValueError(f"problem '{spec.name}' has no Markovian restriction")
    if spec.dim != 1:
        raise ValueError("the tree oracle handles 1-d problems only")
    mk = spec.markov
    actions = tuple(float(a[0]) for a in spec.action_set)
    marks = tuple(float(b[0]) for b in spec.impulse_set)
    span = extra_span
    if marks:
        span = max(span, spec.gamma_bound)
    return TreeSpec(steps, spec.horizon, float(spec.x0[0]), mk.sigma,
                    actions, marks, mk.phi, mk.psi, mk.ell, mk.gamma,
                    k_max, extra_span=span)


def solve_tree(ts: TreeSpec) -> TreeSolution:
    """Backward induction over the full lattice; exact on the grid."""
    M, dt, h = ts.steps, ts.dt, ts.increment
    sqdt = math.sqrt(dt)
    for a in ts.actions:
        if abs(a) * sqdt >= ts.sigma:
            raise ProbabilityOutOfRange(
                f"|alpha|*sqrt(dt)={abs(a) * sqdt:.3g} >= sigma={ts.sigma:.3g}"
            )
    if not ts.actions:
        raise ValueError("action set must be nonempty")

    pad = int(math.ceil(ts.extra_span / h)) + 1 if ts.extra_span > 0 else 1
    span = M + pad
    offsets = np.arange(-span, span + 1)
    x = ts.x0 + offsets * h
    n = x.size
    R = ts.k_max

    probs = np.array([(1.0 + (a / ts.sigma) * sqdt) / 2.0 for a in ts.actions])
    phi = np.vectorize(ts.phi)
    psi = np.vectorize(ts.psi)

    V = np.empty((M + 1, n, R + 1))
    V[M] = psi(x)[:, None]

    # impulse targets per mark: snapped node index and cost, time-independent
    # coefficients are allowed, so evaluate lazily per step
    for i in range(M - 1, -1, -1):
        t = i * dt
        phi_tx = np.stack([phi(t, x, a) for a in ts.actions])  # (nA, n)
        V_next = V[i + 1]  # (n, R+1)
        up = np.empty_like(V_next)
        dn = np.empty_like(V_next)
        up[:-1] = V_next[1:]
        dn[1:] = V_next[:-1]
        # lattice edges are beyond any reachable or impulse-shifted state;
        # clamp so the recursion stays defined there
        up[-1] = V_next[-1]
        dn[0] = V_next[0]
        # continuation under the worst action, all budgets at once
        cand = (
            phi_tx[:, :, None] * dt
            + probs[:, None, None] * up[None, :, :]
            + (1.0 - probs)[:, None, None] * dn[None, :, :]
        )  # (nA, n, R+1)
        C = np.min(cand, axis=0)
        V[i, :, 0] = C[:, 0]
        for r in range(1, R + 1):
            best = np.full(n, -np.inf)
            for b in ts.marks:
                target = np.array([ts.gamma(t, xv, b) for xv in x])
                m_idx = np.rint((target - ts.x0) / h).astype(int) + span
                if np.any((m_idx < 0) | (m_idx >= n)):
                    raise OffTreeImpulse(
                        f"impulse target beyond lattice at step {i}, mark {b}"
                    )
                cost = np.array([ts.ell(t, xv, b) for xv in x])
                best = np.maximum(best, V[i, m_idx, r - 1] - cost)
            V[i, :, r] = np.maximum(C[:, r], best)
    return TreeSolution(ts, offsets, V)


def oracle_values(sol: TreeSolution) -> list[tuple[int, float]]:
    """(budget, value) rows at the origin, for CSV output."""
    return [(r, sol.value_at_origin(r)) for r in range(sol.spec.k_max + 1)]
