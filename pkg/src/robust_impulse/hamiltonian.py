"""Pointwise Hamiltonian of the game and its exact minimum over the
finite action grid.

H(t, prefix, z, alpha) = z . breve_a(t, prefix, alpha) + phi(t, prefix, alpha)

The minimizer is selected deterministically: exact minimum over the grid,
ties broken by the smallest grid index.  This deterministic selection is
the computational stand-in for a measurable selection of the argmin.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .problems import ProblemSpec, breve_a


@dataclass(frozen=True)
class HamiltonianEval:
    """Minimum value and minimizer per path; optionally the full table."""

    value: np.ndarray  # (P,)
    minimizer_index: np.ndarray  # (P,) indices into the action grid
    minimizer: np.ndarray  # (P, dA)
    per_action: Optional[np.ndarray] = None  # (nA, P) diagnostic table


def hamiltonian(spec: ProblemSpec, t: float, prefix: np.ndarray,
                z: np.ndarray, alpha) -> np.ndarray:
    """H for one action, vectorized across paths; z has shape (P, d)."""
    z = np.atleast_2d(np.asarray(z, dtype=float))
    drift = breve_a(spec, t, prefix, alpha)
    return np.sum(z * drift, axis=1) + spec.running_reward(t, prefix, alpha)


def minimize_hamiltonian(spec: ProblemSpec, t: float, prefix: np.ndarray,
                         z: np.ndarray, keep_table: bool = False) -> HamiltonianEval:
    """Exact minimum of H over the action grid, per path."""
    A = spec.action_set
    if A.shape[0] == 0:
        raise ValueError("action set is empty")
    table = np.stack([hamiltonian(spec, t, prefix, z, a) for a in A])
    idx = np.argmin(table, axis=0)  # first minimum wins ties
    value = table[idx, np.arange(table.shape[1])]
    return HamiltonianEval(
        value=value,
        minimizer_index=idx,
        minimizer=A[idx],
        per_action=table if keep_table else None,
    )
