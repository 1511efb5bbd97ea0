"""Problem instances: coefficients, action sets, rewards, and built-ins.

Coefficient conventions (all vectorized across the path axis):

- a path *prefix* is the states array up to and including the current
  grid index, shape (P, i+1, d); the current state is ``prefix[:, -1]``
- ``drift_a1(t, prefix) -> (P, d1)``
- ``drift_a2(t, prefix, alpha) -> (P, d2)`` with alpha of shape (dA,) or (P, dA)
- ``sigma(t, prefix) -> (d, d) or (P, d, d)`` lower block triangular
- ``impulse_map(t, prefix, b) -> (P, d)`` with b of shape (dU,) or (P, dU)
- ``running_reward(t, prefix, alpha) -> (P,)``
- ``terminal_reward(x) -> (P,)`` with x of shape (P, d)
- ``intervention_cost(t, x, b) -> (P,)`` with x the pre-impulse state

All coefficient functions must be pure and reentrant; ProblemSpec itself
is immutable and safe to share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import SingularDiffusion


@dataclass(frozen=True)
class MarkovRestriction:
    """Scalar Markovian forms of a 1-d problem, consumed by the tree oracle."""

    sigma: float
    phi: Callable[[float, float, float], float]
    psi: Callable[[float], float]
    ell: Callable[[float, float, float], float]
    gamma: Callable[[float, float, float], float]


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    dim: int
    d1: int
    d2: int
    x0: np.ndarray
    horizon: float
    drift_a1: Optional[Callable]
    drift_a2: Callable
    sigma: Callable
    impulse_map: Callable
    gamma_bound: float
    running_reward: Callable
    terminal_reward: Callable
    intervention_cost: Callable
    cost_floor: float
    action_set: np.ndarray
    impulse_set: np.ndarray
    growth_exponent: float = 2.0
    sigma22_cond_bound: float = 1e8
    markov: Optional[MarkovRestriction] = None

    def __post_init__(self):
        if self.dim != self.d1 + self.d2:
            raise ValueError("dim must equal d1 + d2")
        x0 = np.asarray(self.x0, dtype=float).reshape(self.dim)
        x0.flags.writeable = False
        object.__setattr__(self, "x0", x0)
        A = np.atleast_2d(np.asarray(self.action_set, dtype=float))
        if A.shape[0] == 1 and A.shape[1] > 1 and A.size == A.shape[1]:
            # a flat list of scalar actions
            A = A.reshape(-1, 1)
        A.flags.writeable = False
        object.__setattr__(self, "action_set", A)
        U = np.asarray(self.impulse_set, dtype=float)
        if U.size == 0:
            U = U.reshape(0, 1)
        elif U.ndim == 1:
            U = U.reshape(-1, 1)
        U.flags.writeable = False
        object.__setattr__(self, "impulse_set", U)
        if self.cost_floor <= 0:
            raise ValueError("cost_floor must be strictly positive")

    @property
    def n_actions(self) -> int:
        return self.action_set.shape[0]

    @property
    def n_marks(self) -> int:
        return self.impulse_set.shape[0]


def _sigma22(spec: ProblemSpec, t: float, prefix: np.ndarray) -> np.ndarray:
    sig = np.asarray(spec.sigma(t, prefix), dtype=float)
    d1 = spec.d1
    return sig[..., d1:, d1:]


def breve_a(spec: ProblemSpec, t: float, prefix: np.ndarray, alpha) -> np.ndarray:
    """Drift absorbed into the driver: (0, sigma_22^{-1} a_2)."""
    P = prefix.shape[0]
    a2 = np.broadcast_to(
        np.asarray(spec.drift_a2(t, prefix, alpha), dtype=float), (P, spec.d2)
    )
    s22 = _sigma22(spec, t, prefix)
    if s22.ndim == 2:
        cond = np.linalg.cond(s22)
        if not np.isfinite(cond) or cond > spec.sigma22_cond_bound:
            raise SingularDiffusion(
                f"cond(sigma_22)={cond:.3g} exceeds {spec.sigma22_cond_bound:.3g}"
            )
        y = np.linalg.solve(s22, a2.T).T
    else:
        cond = np.linalg.cond(s22)
        worst = float(np.max(cond))
        if not np.isfinite(worst) or worst > spec.sigma22_cond_bound:
            raise SingularDiffusion(
                f"cond(sigma_22)={worst:.3g} exceeds {spec.sigma22_cond_bound:.3g}"
            )
        y = np.linalg.solve(s22, a2[..., None])[..., 0]
    out = np.zeros((P, spec.dim))
    out[:, spec.d1:] = y
    return out


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    witness: Optional[str] = None


@dataclass(frozen=True)
class ValidationReport:
    problem: str
    n_probe: int
    seed: int
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def summary(self) -> str:
        lines = [f"validation of '{self.problem}' ({self.n_probe} probes)"]
        for c in self.checks:
            status = "PASS" if c.passed else f"FAIL ({c.witness})"
            lines.append(f"  {c.name}: {status}")
        return "\n".join(lines)


def validate(spec: ProblemSpec, n_probe: int = 10_000, seed: int = 0) -> ValidationReport:
    """Monte-Carlo spot check of the structural invariants of a problem.

    Probes random path prefixes generated by a crude driftless walk;
    deterministic given the seed.
    """
    if n_probe < 1:
        raise ValueError("n_probe must be >= 1")
    rng = np.random.Generator(np.random.Philox(key=seed))
    d, d1 = spec.dim, spec.d1
    T = spec.horizon
    n_steps = 16
    dt = T / n_steps
    # crude driftless probe walk
    states = np.empty((n_probe, n_steps + 1, d))
    states[:, 0] = spec.x0
    for i in range(n_steps):
        sig = np.asarray(spec.sigma(i * dt, states[:, : i + 1]), dtype=float)
        dW = rng.standard_normal((n_probe, d)) * np.sqrt(dt)
        if sig.ndim == 2:
            states[:, i + 1] = states[:, i] + dW @ sig.T
        else:
            states[:, i + 1] = states[:, i] + np.einsum("pij,pj->pi", sig, dW)

    checks = []
    idx = rng.integers(1, n_steps + 1, size=n_probe)
    probe_t = idx * dt
    probe_x = states[np.arange(n_probe), idx]

    # intervention cost floor and impulse growth, sampled over U
    if spec.n_marks > 0:
        floor_ok, floor_wit = True, None
        growth_ok, growth_wit = True, None
        for b in spec.impulse_set:
            for i_probe in range(0, n_probe, max(1, n_probe // 512)):
                t = float(probe_t[i_probe])
                x = probe_x[i_probe : i_probe + 1]
                cost = float(np.asarray(spec.intervention_cost(t, x, b)).reshape(-1)[0])
                if cost < spec.cost_floor and floor_ok:
                    floor_ok = False
                    floor_wit = f"ell(t={t:.3g}, x={x[0]}, b={b})={cost:.3g}"
                prefix = states[i_probe : i_probe + 1, : int(idx[i_probe]) + 1]
                gx = np.asarray(spec.impulse_map(t, prefix, b)).reshape(-1)
                bound = max(spec.gamma_bound, float(np.linalg.norm(x[0])))
                if np.linalg.norm(gx) > bound * (1 + 1e-12) and growth_ok:
                    growth_ok = False
                    growth_wit = f"|Gamma|={np.linalg.norm(gx):.3g} > {bound:.3g}"
        checks.append(CheckResult("cost_floor", floor_ok, floor_wit))
        checks.append(CheckResult("impulse_growth", growth_ok, growth_wit))

    # diffusion block structure and invertibility
    blk_ok, blk_wit = True, None
    inv_ok, inv_wit = True, None
    for i_probe in range(0, n_probe, max(1, n_probe // 256)):
        t = float(probe_t[i_probe])
        prefix = states[i_probe : i_probe + 1, : int(idx[i_probe]) + 1]
        sig = np.asarray(spec.sigma(t, prefix), dtype=float)
        sig = sig if sig.ndim == 2 else sig[0]
        if d1 > 0 and np.any(sig[:d1, d1:] != 0) and blk_ok:
            blk_ok = False
            blk_wit = f"nonzero upper-right block at t={t:.3g}"
        cond = np.linalg.cond(sig[d1:, d1:])
        if (not np.isfinite(cond) or cond > spec.sigma22_cond_bound) and inv_ok:
            inv_ok = False
            inv_wit = f"cond(sigma_22)={cond:.3g} at t={t:.3g}"
    checks.append(CheckResult("sigma_block_structure", blk_ok, blk_wit))
    checks.append(CheckResult("sigma22_invertible", inv_ok, inv_wit))

    return ValidationReport(spec.name, n_probe, seed, tuple(checks))


# ---------------------------------------------------------------------------
# Built-in desk-scale problems
# ---------------------------------------------------------------------------


def mart1d(x0: float = 1.0, horizon: float = 1.0, sigma: float = 0.2,
           a_max: float = 0.1) -> ProblemSpec:
    """1-d martingale sanity case: driftless under the base measure,
    terminal reward x, no impulses allowed."""
    sig_mat = np.array([[sigma]])

    def _sigma(t, prefix):
        return sig_mat

    def _a2(t, prefix, alpha):
        a = np.atleast_2d(np.asarray(alpha, dtype=float))
        return np.broadcast_to(a[..., :1], (prefix.shape[0], 1))

    def _gamma(t, prefix, b):
        return prefix[:, -1].copy()

    return ProblemSpec(
        name="mart1d", dim=1, d1=0, d2=1, x0=[x0], horizon=horizon,
        drift_a1=None, drift_a2=_a2, sigma=_sigma,
        impulse_map=_gamma, gamma_bound=abs(x0) + 1.0,
        running_reward=lambda t, prefix, alpha: np.zeros(prefix.shape[0]),
        terminal_reward=lambda x: x[:, 0].copy(),
        intervention_cost=lambda t, x, b: np.full(x.shape[0], 0.1),
        cost_floor=0.1,
        action_set=[[-a_max], [0.0], [a_max]],
        impulse_set=np.empty((0, 1)),
        growth_exponent=1.0,
        markov=MarkovRestriction(
            sigma=sigma,
            phi=lambda t, x, alpha: 0.0,
            psi=lambda x: x,
            ell=lambda t, x, b: 0.1,
            gamma=lambda t, x, b: x,
        ),
    )


def cash1d(x0: float = 1.0, horizon: float = 1.0, sigma: float = 0.2,
           a_max: float = 0.1, gamma_bound: float = 5.0, delta: float = 0.1,
           cost_slope: float = 0.05, marks=(-0.5, 0.5),
           cost_scale: float = 1.0) -> ProblemSpec:
    """1-d quadratic-penalty problem with shift impulses.

    Quadratic running and terminal penalties on the state; impulses shift
    the state by a mark (clamped to the growth bound); the adversary tilts
    the drift within [-a_max, a_max].
    """
    sig_mat = np.array([[sigma]])
    K = gamma_bound

    def _sigma(t, prefix):
        return sig_mat

    def _a2(t, prefix, alpha):
        a = np.atleast_2d(np.asarray(alpha, dtype=float))
        return np.broadcast_to(a[..., :1], (prefix.shape[0], 1))

    def _gamma(t, prefix, b):
        b = np.atleast_2d(np.asarray(b, dtype=float))
        return np.clip(prefix[:, -1] + b[..., :1], -K, K)

    def _phi(t, prefix, alpha):
        x = prefix[:, -1, 0]
        return -x * x

    def _ell(t, x, b):
        return cost_scale * (delta + cost_slope * np.minimum(np.abs(x[:, 0]), K))

    return ProblemSpec(
        name="cash1d", dim=1, d1=0, d2=1, x0=[x0], horizon=horizon,
        drift_a1=None, drift_a2=_a2, sigma=_sigma,
        impulse_map=_gamma, gamma_bound=K,
        running_reward=_phi,
        terminal_reward=lambda x: -x[:, 0] ** 2,
        intervention_cost=_ell,
        cost_floor=cost_scale * delta,
        action_set=[[-a_max], [0.0], [a_max]],
        impulse_set=list(marks),
        growth_exponent=2.0,
        markov=MarkovRestriction(
            sigma=sigma,
            phi=lambda t, x, alpha: -x * x,
            psi=lambda x: -x * x,
            ell=lambda t, x, b: cost_scale * (delta + cost_slope * min(abs(x), K)),
            gamma=lambda t, x, b: min(max(x + b, -K), K),
        ),
    )


def pathdep1d(**kwargs) -> ProblemSpec:
    """cash1d with the running penalty charged on the running maximum."""
    base = cash1d(**kwargs)

    def _phi(t, prefix, alpha):
        m = np.max(prefix[:, :, 0], axis=1)
        return -m * m

    return replace(base, name="pathdep1d", running_reward=_phi, markov=None)


_BUILTINS = {"mart1d": mart1d, "cash1d": cash1d, "pathdep1d": pathdep1d}


def builtin_names():
    return sorted(_BUILTINS)


def make_problem(name: str, **overrides) -> ProblemSpec:
    """Instantiate a built-in problem, applying numeric parameter overrides."""
    try:
        builder = _BUILTINS[name]
    except KeyError:
        raise KeyError(f"unknown problem '{name}'; choose from {builtin_names()}")
    return builder(**overrides)
