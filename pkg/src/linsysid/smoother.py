"""Quadratic state smoothing by forward Riccati recursion and backward sweep.

For a fixed transition matrix A, the states minimizing

    K_x = gamma/2 sum_{t=1}^{T-1} |x_{t+1} - A x_t|^2
        + mu/2    sum_{t=2}^{T}   |y_t - C x_t|^2      (x_1 = x fixed)

solve a block-tridiagonal linear system.  Rather than assembling it, a
forward pass propagates gain matrices Sigma_t and drift states r_t, a
backward pass produces the adjoints p_t, and the optimal states decouple as
x_t = r_t - Sigma_t p_t.  Cost is O(T n^3) with O(T n^2) memory.

There is no observation at t = 1; the recursions treat y_1 as C x, which
zeroes the initial innovation since r_1 = x.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import check_gamma, check_mu, check_square
from .model import ObservedData

__all__ = ["SmootherGains", "riccati_gains", "smoother_solve", "state_fit"]


@dataclass(frozen=True)
class SmootherGains:
    """Forward-pass products: gains Sigma_1..Sigma_T and drifts r_1..r_T.

    ``sigmas[t-1]`` and ``drifts[t-1]`` are Sigma_t and r_t.  Sigma_1 = 0 and
    r_1 = x always; neither depends on the horizon, so a longer record of the
    same data extends these arrays without changing existing entries.
    """

    sigmas: np.ndarray
    drifts: np.ndarray

    def sigma(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.sigmas.shape[0]:
            raise IndexError(f"time index {t} outside 1..{self.sigmas.shape[0]}")
        return self.sigmas[t - 1]

    def drift(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.drifts.shape[0]:
            raise IndexError(f"time index {t} outside 1..{self.drifts.shape[0]}")
        return self.drifts[t - 1]


def _validate(A, data: ObservedData, gamma: float, mu: float):
    A = check_square(A, "A")
    if A.shape[0] != data.n:
        raise ValueError(f"A is {A.shape[0]}x{A.shape[0]} but the data has n={data.n}")
    return A, check_gamma(gamma), check_mu(mu)


def riccati_gains(A, data: ObservedData, gamma: float, mu: float) -> SmootherGains:
    """Forward pass: Sigma_1 = 0, r_1 = x, then for t = 1..T-1

        W_t       = C Sigma_t C* + I/mu
        Sigma_t+1 = A Sigma_t A* + I/gamma - A Sigma_t C* W_t^{-1} C Sigma_t A*
        r_t+1     = A r_t + A Sigma_t C* W_t^{-1} (y_t - C r_t)

    Each Sigma is symmetrized after its update; with exact arithmetic it
    already is, and resymmetrizing stops rounding from feeding back through
    the recursion.
    """
    A, gamma, mu = _validate(A, data, gamma, mu)
    C = data.C
    n, p, T = data.n, data.p, data.T
    sigmas = np.zeros((T, n, n))
    drifts = np.zeros((T, n))
    drifts[0] = data.x
    for t in range(1, T):
        Sig = sigmas[t - 1]
        r = drifts[t - 1]
        W = C @ Sig @ C.T + np.eye(p) / mu
        gain = A @ Sig @ C.T @ np.linalg.solve(W, np.eye(p))
        Snext = A @ Sig @ A.T + np.eye(n) / gamma - gain @ C @ Sig @ A.T
        sigmas[t] = 0.5 * (Snext + Snext.T)
        innovation = np.zeros(p) if t == 1 else data.obs(t) - C @ r
        drifts[t] = A @ r + gain @ innovation
    return SmootherGains(sigmas=sigmas, drifts=drifts)


def smoother_solve(A, data: ObservedData, gamma: float, mu: float):
    """Optimal states and adjoints for the state-fit problem at fixed A.

    Returns ``(states, adjoints, gains)`` where ``states[t-1]`` is the
    minimizer x_t (states[0] is the fixed initial state), and
    ``adjoints[t-1]`` is p_t from the backward recursion

        p_T = -mu (I + mu C*C Sigma_T)^{-1} C* (y_T - C r_T)
        p_t = (I + mu C*C Sigma_t)^{-1} (A* p_{t+1} - mu C* (y_t - C r_t)).

    The states recover as x_t = r_t - Sigma_t p_t.  p_1 falls out of the
    recursion (with the y_1 = Cx convention it reduces to A* p_2) and is
    exposed for completeness, but no optimality condition constrains it.
    """
    A, gamma, mu = _validate(A, data, gamma, mu)
    gains = riccati_gains(A, data, gamma, mu)
    C = data.C
    n, T = data.n, data.T
    CtC = C.T @ C
    adjoints = np.zeros((T, n))
    innov_T = data.obs(T) - C @ gains.drift(T)
    E_T = np.eye(n) + mu * CtC @ gains.sigma(T)
    adjoints[T - 1] = np.linalg.solve(E_T, -mu * C.T @ innov_T)
    for t in range(T - 1, 0, -1):
        innovation = np.zeros(data.p) if t == 1 else data.obs(t) - C @ gains.drift(t)
        E_t = np.eye(n) + mu * CtC @ gains.sigma(t)
        rhs = A.T @ adjoints[t] - mu * C.T @ innovation
        adjoints[t - 1] = np.linalg.solve(E_t, rhs)
    states = gains.drifts - np.einsum("tij,tj->ti", gains.sigmas, adjoints)
    states[0] = data.x
    return states, adjoints, gains


def state_fit(A, states: np.ndarray, data: ObservedData, gamma: float, mu: float) -> float:
    """Value of the state-fit objective K_x at the given states."""
    A = np.asarray(A, dtype=float)
    dyn = states[1:] - states[:-1] @ A.T
    out = data.observations - states[1:] @ data.C.T
    return 0.5 * gamma * float(np.sum(dyn * dyn)) + 0.5 * mu * float(np.sum(out * out))
