"""Least-squares conditional expectations for the backward pass.

A featurizer maps a path prefix to a fixed-length feature vector using
only information available at the current index (adaptedness); the
regression basis is the set of monomials of total degree <= deg over the
features.  Fitted coefficient rows across time steps form a ValueSurface,
the computational representation of t -> Y(t, features).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations_with_replacement
from typing import Callable, Optional

import numpy as np

from .controls import PathBatch, TimeGrid
from .errors import IllConditioned


@dataclass(frozen=True)
class Featurizer:
    """Named map from a path prefix (P, i+1, d) to features (P, F)."""

    name: str
    dim: int
    map: Callable[[int, np.ndarray], np.ndarray]

    def __call__(self, i: int, prefix: np.ndarray) -> np.ndarray:
        out = np.asarray(self.map(i, prefix), dtype=float)
        if out.ndim != 2 or out.shape[1] != self.dim:
            raise ValueError(
                f"featurizer '{self.name}' returned shape {out.shape}, "
                f"expected (P, {self.dim})"
            )
        return out

    def shifted(self, i: int, prefix: np.ndarray, new_last: np.ndarray) -> np.ndarray:
        """Features of the prefix with its last state replaced (post-impulse)."""
        shifted = prefix.copy()
        shifted[:, -1] = new_last
        return self(i, shifted)


def markov_featurizer(dim: int) -> Featurizer:
    """Features = current state; appropriate for Markovian coefficients."""
    return Featurizer("markov", dim, lambda i, prefix: prefix[:, -1])


def pathdep_featurizer(dim: int) -> Featurizer:
    """Features = (current state, running maximum of the first component)."""

    def _map(i, prefix):
        runmax = np.max(prefix[:, :, 0], axis=1, keepdims=True)
        return np.concatenate([prefix[:, -1], runmax], axis=1)

    return Featurizer("pathdep", dim + 1, _map)


FEATURIZERS = {"markov": markov_featurizer, "pathdep": pathdep_featurizer}


def monomial_exponents(n_features: int, degree: int) -> list[tuple]:
    """Exponent multi-indices of all monomials with total degree <= degree."""
    exps = []
    for deg in range(degree + 1):
        for combo in combinations_with_replacement(range(n_features), deg):
            e = [0] * n_features
            for j in combo:
                e[j] += 1
            exps.append(tuple(e))
    return exps


def basis_size(n_features: int, degree: int) -> int:
    return len(monomial_exponents(n_features, degree))


def polynomial_design(features: np.ndarray, degree: int) -> np.ndarray:
    """Design matrix (P, B) of monomials of total degree <= degree."""
    feats = np.asarray(features, dtype=float)
    P, F = feats.shape
    cols = []
    for exp in monomial_exponents(F, degree):
        col = np.ones(P)
        for j, e in enumerate(exp):
            if e:
                col = col * feats[:, j] ** e
        cols.append(col)
    return np.column_stack(cols)


def fit(design: np.ndarray, targets: np.ndarray, ridge: float = 0.0) -> np.ndarray:
    """Ridge-regularized least squares via SVD; raises IllConditioned when
    the design is rank deficient and no ridge is active."""
    design = np.asarray(design, dtype=float)
    targets = np.asarray(targets, dtype=float)
    P, B = design.shape
    if P < B and ridge == 0.0:
        raise IllConditioned(f"{P} samples for {B} basis functions with ridge=0")
    if ridge > 0.0:
        aug = np.vstack([design, np.sqrt(ridge) * np.eye(B)])
        rhs = np.concatenate([targets, np.zeros(B)])
        beta, _, _, _ = np.linalg.lstsq(aug, rhs, rcond=None)
        return beta
    beta, _, rank, _ = np.linalg.lstsq(design, targets, rcond=None)
    if rank < B:
        raise IllConditioned(f"effective rank {rank} < basis size {B} with ridge=0")
    return beta


def default_ridge(design: np.ndarray) -> float:
    """Trace-scaled default ridge 1e-8 * tr(X'X)/B."""
    B = design.shape[1]
    return 1e-8 * float(np.sum(design * design)) / B


@dataclass
class ValueSurface:
    """Per-time-step regression coefficients for a scalar value process.

    coeffs has shape (M+1, B); evaluation at step i is
    basis(features) @ coeffs[i].
    """

    grid: TimeGrid
    feature_dim: int
    degree: int
    coeffs: np.ndarray

    def __post_init__(self):
        B = basis_size(self.feature_dim, self.degree)
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.shape[1] != B:
            raise ValueError(f"expected {B} coefficients per step")

    @property
    def basis_dim(self) -> int:
        return self.coeffs.shape[1]

    def evaluate(self, i: int, features: np.ndarray) -> np.ndarray:
        return polynomial_design(features, self.degree) @ self.coeffs[i]

    def to_json(self) -> str:
        return json.dumps({
            "horizon": self.grid.horizon,
            "steps": self.grid.steps,
            "feature_dim": self.feature_dim,
            "degree": self.degree,
            "coeffs": self.coeffs.tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "ValueSurface":
        obj = json.loads(text)
        return cls(TimeGrid(obj["horizon"], obj["steps"]), obj["feature_dim"],
                   obj["degree"], np.array(obj["coeffs"]))


@dataclass
class VectorSurface:
    """Per-step coefficients for an R^d-valued process (the Z estimate);
    coeffs has shape (M, B, d)."""

    grid: TimeGrid
    feature_dim: int
    degree: int
    coeffs: np.ndarray

    def evaluate(self, i: int, features: np.ndarray) -> np.ndarray:
        return polynomial_design(features, self.degree) @ self.coeffs[i]


def condexp(batch: PathBatch, featurizer: Featurizer, values_at_next: np.ndarray,
            i: int, ridge: float = 0.0, degree: int = 2):
    """Regression estimate of E[values_at_next | F_{t_i}].

    Returns the coefficient row and the in-sample fitted values.
    """
    if i >= batch.grid.steps:
        raise ValueError("i must be an interior grid index")
    feats = featurizer(i, batch.states[:, : i + 1])
    design = polynomial_design(feats, degree)
    beta = fit(design, values_at_next, ridge)
    return beta, design @ beta
