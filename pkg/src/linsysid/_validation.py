"""Input validation helpers shared across the package.

Every public entry point funnels its array arguments through these so that
shape and finiteness mistakes fail loudly, with the offending argument named,
instead of surfacing as a cryptic linear algebra error three calls deeper.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "as_matrix",
    "as_vector",
    "as_state_sequence",
    "check_square",
    "check_gamma",
    "check_mu",
    "RankDeficientError",
]


class RankDeficientError(np.linalg.LinAlgError):
    """Raised when a solve needs more rank than the data provides.

    Carries the numerical rank that was actually observed so callers (and
    error messages) can say how degenerate the data is.
    """

    def __init__(self, message: str, rank: int):
        super().__init__(message)
        self.rank = rank


def as_matrix(M, name: str = "matrix", dtype=float) -> np.ndarray:
    """Coerce to a 2-d float array with finite entries."""
    M = np.asarray(M, dtype=dtype)
    if M.ndim != 2:
        raise ValueError(f"{name} must be 2-dimensional, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise ValueError(f"{name} contains non-finite entries")
    return M


def as_vector(v, name: str = "vector", dim: int | None = None) -> np.ndarray:
    """Coerce to a 1-d float array with finite entries, optionally of length ``dim``."""
    v = np.asarray(v, dtype=float)
    if v.ndim == 2 and 1 in v.shape:
        v = v.ravel()
    if v.ndim != 1:
        raise ValueError(f"{name} must be 1-dimensional, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValueError(f"{name} must have length {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValueError(f"{name} contains non-finite entries")
    return v


def as_state_sequence(X, name: str = "states") -> np.ndarray:
    """Coerce to a (T, n) float array of row-stacked states, T >= 2."""
    X = np.asarray(X, dtype=float)
    if X.ndim != 2:
        raise ValueError(f"{name} must be a (T, n) array, got shape {X.shape}")
    if X.shape[0] < 2:
        raise ValueError(f"{name} needs at least two states, got T={X.shape[0]}")
    if not np.all(np.isfinite(X)):
        raise ValueError(f"{name} contains non-finite entries")
    return X


def check_square(M: np.ndarray, name: str = "matrix") -> np.ndarray:
    M = as_matrix(M, name)
    if M.shape[0] != M.shape[1]:
        raise ValueError(f"{name} must be square, got shape {M.shape}")
    return M


def check_gamma(gamma: float) -> float:
    gamma = float(gamma)
    if not np.isfinite(gamma) or gamma <= 0:
        raise ValueError(f"gamma must be a positive finite number, got {gamma}")
    return gamma


def check_mu(mu: float) -> float:
    mu = float(mu)
    if not np.isfinite(mu) or mu <= 0:
        raise ValueError(f"mu must be a positive finite number, got {mu}")
    return mu
