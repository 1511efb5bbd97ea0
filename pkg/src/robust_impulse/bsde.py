"""Discrete-time backward solver for (reflected) BSDEs.

One backward pass over a simulated path batch: Z is the regression of
Y_{i+1} dW_i / dt on the basis, C the regression of Y_{i+1}, and the
explicit scheme sets Y_i = C + f(i, C, Z) dt, reflected at the barrier
when one is supplied.  The reflection increment is (S - C - f dt)^+, so
whenever it is positive Y equals the barrier bit-exactly and the discrete
Skorokhod identity sum (Y - S) dK = 0 holds with no tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .controls import PathBatch
from .errors import BarrierAboveTerminal, DriverNonFinite
from .regression import (Featurizer, ValueSurface, VectorSurface, basis_size,
                         default_ridge, fit, polynomial_design)


@dataclass(frozen=True)
class BackwardConfig:
    degree: int = 2
    ridge: Optional[float] = None  # None: trace-scaled default per step
    f_cap: Optional[float] = None  # per-step driver clamp, off by default
    tol_hit: float = 1e-9


@dataclass
class BackwardState:
    """Output of one backward pass."""

    batch: PathBatch
    Y: np.ndarray  # (P, M+1)
    Z: np.ndarray  # (P, M, d) in-sample fitted values
    K_increments: np.ndarray  # (P, M), all zero for non-reflected runs
    barrier_values: Optional[np.ndarray]  # (P, M) or None
    y_surface: ValueSurface  # regression of Y_i on the basis at i
    c_surface: ValueSurface  # regression of Y_{i+1} (continuation target)
    z_surface: VectorSurface
    y0: float
    y0_se: float
    diagnostics: dict

    @property
    def K(self) -> np.ndarray:
        """Cumulative reflection process, K_0 = 0, shape (P, M+1)."""
        P = self.Y.shape[0]
        return np.concatenate(
            [np.zeros((P, 1)), np.cumsum(self.K_increments, axis=1)], axis=1
        )


def _backward(batch: PathBatch, featurizer: Featurizer, driver: Callable,
              terminal: np.ndarray, barrier: Optional[Callable],
              cfg: BackwardConfig) -> BackwardState:
    grid = batch.grid
    M, P, d = grid.steps, batch.n_paths, batch.dim
    dt = grid.dt
    states, dW = batch.states, batch.brownian_increments
    terminal = np.asarray(terminal, dtype=float).reshape(P)

    B = basis_size(featurizer.dim, cfg.degree)
    Y = np.empty((P, M + 1))
    Y[:, M] = terminal
    Z = np.zeros((P, M, d))
    K_inc = np.zeros((P, M))
    S_store = np.empty((P, M)) if barrier is not None else None

    y_coeffs = np.zeros((M + 1, B))
    c_coeffs = np.zeros((M + 1, B))
    z_coeffs = np.zeros((M, B, d))
    clamp_hits = np.zeros(M, dtype=int)
    mean_abs_z = np.zeros(M)
    mean_k = np.zeros(M)

    if barrier is not None:
        sM = barrier(M, states)
        if sM is not None:
            sM = np.asarray(sM, dtype=float).reshape(P)
            bad = np.nonzero(sM > terminal)[0]
            if bad.size:
                p = int(bad[np.argmax(sM[bad] - terminal[bad])])
                raise BarrierAboveTerminal(p, float(sM[p]), float(terminal[p]))

    feats_M = featurizer(M, states)
    design_M = polynomial_design(feats_M, cfg.degree)
    ridge_M = cfg.ridge if cfg.ridge is not None else default_ridge(design_M)
    y_coeffs[M] = fit(design_M, terminal, ridge_M)
    c_coeffs[M] = y_coeffs[M]

    y0_samples = None
    for i in range(M - 1, -1, -1):
        prefix = states[:, : i + 1]
        feats = featurizer(i, prefix)
        design = polynomial_design(feats, cfg.degree)
        ridge = cfg.ridge if cfg.ridge is not None else default_ridge(design)
        y_next = Y[:, i + 1]
        for j in range(d):
            z_coeffs[i, :, j] = fit(design, y_next * dW[:, i, j] / dt, ridge)
            Z[:, i, j] = design @ z_coeffs[i, :, j]
        c_coeffs[i] = fit(design, y_next, ridge)
        C = design @ c_coeffs[i]
        f = np.asarray(driver(i, prefix, C, Z[:, i]), dtype=float).reshape(P)
        if not np.all(np.isfinite(f)):
            raise DriverNonFinite(f"driver returned non-finite values at step {i}")
        if cfg.f_cap is not None:
            over = np.abs(f) > cfg.f_cap
            clamp_hits[i] = int(np.count_nonzero(over))
            f = np.clip(f, -cfg.f_cap, cfg.f_cap)
        cont = C + f * dt
        if barrier is not None:
            s = barrier(i, prefix)
            if s is None:
                S_store[:, i] = -np.inf
                Y[:, i] = cont
            else:
                s = np.asarray(s, dtype=float).reshape(P)
                S_store[:, i] = s
                Y[:, i] = np.maximum(cont, s)
                K_inc[:, i] = np.where(s > cont, s - cont, 0.0)
        else:
            Y[:, i] = cont
        y_coeffs[i] = fit(design, Y[:, i], ridge)
        mean_abs_z[i] = float(np.mean(np.abs(Z[:, i])))
        mean_k[i] = float(np.mean(K_inc[:, i]))
        if i == 0:
            y0_samples = y_next + f * dt

    y0 = float(np.mean(Y[:, 0]))
    y0_se = float(np.std(y0_samples, ddof=1) / np.sqrt(P))
    surf = ValueSurface(grid, featurizer.dim, cfg.degree, y_coeffs)
    csurf = ValueSurface(grid, featurizer.dim, cfg.degree, c_coeffs)
    zsurf = VectorSurface(grid, featurizer.dim, cfg.degree, z_coeffs)
    diags = {
        "clamp_activations": clamp_hits,
        "mean_abs_z": mean_abs_z,
        "mean_k_increment": mean_k,
        "featurizer": featurizer.name,
    }
    return BackwardState(batch, Y, Z, K_inc, S_store, surf, csurf, zsurf,
                         y0, y0_se, diags)


def solve_bsde(batch: PathBatch, featurizer: Featurizer, driver: Callable,
               terminal: np.ndarray, cfg: BackwardConfig = BackwardConfig()
               ) -> BackwardState:
    """Non-reflected backward pass; K is identically zero.

    ``driver(i, prefix, y, z) -> (P,)`` is evaluated explicitly at the
    fitted continuation value and Z estimate.
    """
    return _backward(batch, featurizer, driver, terminal, None, cfg)


def solve_reflected(batch: PathBatch, featurizer: Featurizer, driver: Callable,
                    terminal: np.ndarray, barrier: Callable,
                    cfg: BackwardConfig = BackwardConfig()) -> BackwardState:
    """Reflected backward pass: Y_i = max(C + f dt, S_i).

    ``barrier(i, prefix)`` returns per-path barrier values or None for
    "no barrier at this step" (the minus-infinity sentinel).  The barrier
    at the horizon must not exceed the terminal condition.
    """
    return _backward(batch, featurizer, driver, terminal, barrier, cfg)


def first_hit(state: BackwardState, barrier_values: np.ndarray, from_index: int,
              path: int, tol_hit: Optional[float] = None) -> int:
    """Smallest grid index i >= from_index where Y touches the barrier;
    M when there is none.  barrier_values has shape (P, M+1) with -inf
    where no barrier applies."""
    M = state.batch.grid.steps
    if from_index > M:
        raise ValueError("from_index beyond the horizon")
    for i in range(from_index, M + 1):
        y = state.Y[path, i]
        tol = tol_hit if tol_hit is not None else 1e-9 * (1.0 + abs(y))
        if y <= barrier_values[path, i] + tol:
            return i
    return M


def write_diagnostics_csv(state: BackwardState, path) -> None:
    """Per-step diagnostic table: step, mean/max |Z|, clamp activations,
    mean reflection increment."""
    d = state.diagnostics
    M = state.batch.grid.steps
    with open(path, "w") as fh:
        fh.write("step,mean_abs_z,max_abs_z,clamp_activations,mean_k_increment\n")
        for i in range(M):
            fh.write(
                f"{i},{d['mean_abs_z'][i]!r},"
                f"{float(np.max(np.abs(state.Z[:, i])))!r},"
                f"{int(d['clamp_activations'][i])},"
                f"{d['mean_k_increment'][i]!r}\n"
            )
