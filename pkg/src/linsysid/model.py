"""Data containers and exact simulation for the linear model.

The dynamics are ``x_{t+1} = A x_t`` with known initial state ``x_1 = x``,
optionally observed through a known output map ``y_t = C x_t``.  Time indices
are 1-based throughout the public interface (``state(1)`` is the initial
state, observations run ``t = 2..T``); internal arrays are row-stacked and
0-based.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import as_matrix, as_state_sequence, as_vector, check_square

__all__ = [
    "Trajectory",
    "ObservedData",
    "HyperParams",
    "DescentReport",
    "simulate_full",
    "simulate_observed",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Trajectory:
    """A fully observed state sequence ``x_1, ..., x_T``.

    Parameters
    ----------
    states : ndarray, shape (T, n)
        Row ``k`` holds the state at time ``t = k + 1``.  ``T >= 2``.
    """

    states: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "states", _frozen(as_state_sequence(self.states)))

    @property
    def T(self) -> int:
        return self.states.shape[0]

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def state(self, t: int) -> np.ndarray:
        """State at 1-based time ``t`` (``1 <= t <= T``)."""
        if not 1 <= t <= self.T:
            raise IndexError(f"time index {t} outside 1..{self.T}")
        return self.states[t - 1]


@dataclass(frozen=True)
class ObservedData:
    """Partial observations ``y_t = C x_t`` for ``t = 2..T`` of an unseen trajectory.

    The initial state ``x`` and the output map ``C`` are known; the states at
    ``t >= 2`` are not.

    Parameters
    ----------
    x : ndarray, shape (n,)
        Known initial state.
    C : ndarray, shape (p, n)
        Known output map.
    observations : ndarray, shape (T - 1, p)
        Row ``k`` holds ``y`` at time ``t = k + 2``.
    """

    x: np.ndarray
    C: np.ndarray
    observations: np.ndarray

    def __post_init__(self):
        C = as_matrix(self.C, "C")
        x = as_vector(self.x, "x", dim=C.shape[1])
        Y = np.asarray(self.observations, dtype=float)
        if Y.ndim != 2:
            raise ValueError(f"observations must be (T-1, p), got shape {Y.shape}")
        if Y.shape[0] < 1:
            raise ValueError("observations must cover at least t=2 (one row)")
        if Y.shape[1] != C.shape[0]:
            raise ValueError(
                f"observation dimension {Y.shape[1]} does not match C with {C.shape[0]} rows"
            )
        if not np.all(np.isfinite(Y)):
            raise ValueError("observations contain non-finite entries")
        object.__setattr__(self, "x", _frozen(x))
        object.__setattr__(self, "C", _frozen(C))
        object.__setattr__(self, "observations", _frozen(Y))

    @property
    def T(self) -> int:
        return self.observations.shape[0] + 1

    @property
    def n(self) -> int:
        return self.C.shape[1]

    @property
    def p(self) -> int:
        return self.C.shape[0]

    def obs(self, t: int) -> np.ndarray:
        """Observation at 1-based time ``t`` (``2 <= t <= T``)."""
        if not 2 <= t <= self.T:
            raise IndexError(f"observation index {t} outside 2..{self.T}")
        return self.observations[t - 2]


@dataclass(frozen=True)
class HyperParams:
    """Solver hyper-parameters shared by the iterative identification routines.

    ``gamma`` weights the fit-to-dynamics penalty, ``mu`` the fit-to-output
    penalty, ``rho`` is a non-negative damping weight (0 disables damping),
    and ``grad_tol`` is the stationarity tolerance.
    """

    gamma: float = 1.0
    mu: float = 1.0
    rho: float = 0.0
    max_iters: int = 1000
    grad_tol: float = 1e-8
    seed: int | None = None

    def __post_init__(self):
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError(f"gamma must be positive and finite, got {self.gamma}")
        if not (np.isfinite(self.mu) and self.mu > 0):
            raise ValueError(f"mu must be positive and finite, got {self.mu}")
        if not (np.isfinite(self.rho) and self.rho >= 0):
            raise ValueError(f"rho must be non-negative and finite, got {self.rho}")
        if int(self.max_iters) < 1:
            raise ValueError(f"max_iters must be at least 1, got {self.max_iters}")
        if not (np.isfinite(self.grad_tol) and self.grad_tol > 0):
            raise ValueError(f"grad_tol must be positive, got {self.grad_tol}")


@dataclass
class DescentReport:
    """Per-iteration record of an iterative solve.

    ``objectives[k]`` is the objective at iterate ``k + 1`` (before any step),
    ``grad_norms[k]`` the Frobenius norm of the gradient there, ``steps[k]``
    the step size used to leave it.  ``diverged`` is set when the objective
    ever increased from one iterate to the next.  Methods whose convergence
    theory bounds the iterates themselves also fill ``iterate_norms``;
    elsewhere it stays empty.
    """

    objectives: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    iterate_norms: list = field(default_factory=list)
    converged: bool = False
    reason: str = ""
    diverged: bool = False

    @property
    def n_iters(self) -> int:
        return len(self.objectives)


def simulate_full(A, x, T: int) -> Trajectory:
    """Propagate ``x_{t+1} = A x_t`` from ``x_1 = x`` for ``T`` steps.

    Returns the exact trajectory ``x_1..x_T`` as a :class:`Trajectory`.
    """
    A = check_square(A, "A")
    x = as_vector(x, "x", dim=A.shape[0])
    T = int(T)
    if T < 2:
        raise ValueError(f"T must be at least 2, got {T}")
    X = np.empty((T, A.shape[0]))
    X[0] = x
    for k in range(T - 1):
        X[k + 1] = A @ X[k]
    return Trajectory(X)


def simulate_observed(A, C, x, T: int) -> ObservedData:
    """Simulate the system and return observations ``y_t = C x_t``, ``t = 2..T``."""
    C = as_matrix(C, "C")
    traj = simulate_full(A, x, T)
    if C.shape[1] != traj.n:
        raise ValueError(
            f"C has {C.shape[1]} columns but the state dimension is {traj.n}"
        )
    Y = traj.states[1:] @ C.T
    return ObservedData(x=traj.state(1), C=C, observations=Y)
