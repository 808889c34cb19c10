"""Independent reference computations used to check the package's fast paths.

Everything here deliberately takes a different computational route from the
library code (stacked least squares instead of normal equations, dense solves
instead of recursions, finite differences instead of closed-form gradients),
so agreement is evidence rather than tautology.
"""

import numpy as np


def ridge_stacked_lstsq(states: np.ndarray, gamma: float) -> np.ndarray:
    """Ridge estimate via one stacked QR least squares solve.

    Minimizes 1/2||A||_F^2 + gamma/2 sum|x_{t+1} - A x_t|^2 by stacking the
    regularizer as extra rows, avoiding the package's Cholesky route.
    """
    Z, Xp = states[:-1], states[1:]
    n = states.shape[1]
    lhs = np.vstack([np.sqrt(gamma) * Z, np.eye(n)])
    rhs = np.vstack([np.sqrt(gamma) * Xp, np.zeros((n, n))])
    At, *_ = np.linalg.lstsq(lhs, rhs, rcond=None)
    return At.T


def fd_matrix_gradient(f, A: np.ndarray, eps: float = 1e-5) -> np.ndarray:
    """Central-difference gradient of a scalar function of a matrix."""
    G = np.zeros_like(A, dtype=float)
    for i in range(A.shape[0]):
        for j in range(A.shape[1]):
            E = np.zeros_like(A)
            E[i, j] = eps
            G[i, j] = (f(A + E) - f(A - E)) / (2.0 * eps)
    return G


def dense_state_solve(A, data, gamma, mu):
    """Minimize the state-fit objective by one dense block-tridiagonal solve.

    Solves for x_2..x_T in

        gamma/2 sum_{t=1}^{T-1} |x_{t+1} - A x_t|^2
        + mu/2 sum_{t=2}^{T} |y_t - C x_t|^2

    with x_1 fixed, by assembling the full normal equations.  Returns the
    (T, n) state array including the fixed initial state.
    """
    A = np.asarray(A, dtype=float)
    C = data.C
    n = A.shape[0]
    T = data.T
    m = T - 1
    H = np.zeros((m * n, m * n))
    b = np.zeros(m * n)
    AtA = A.T @ A
    CtC = C.T @ C
    for k in range(m):  # block row k is time t = k + 2
        t = k + 2
        diag = gamma * np.eye(n) + mu * CtC
        if t <= T - 1:
            diag = diag + gamma * AtA
        H[k * n : (k + 1) * n, k * n : (k + 1) * n] = diag
        if k + 1 < m:
            H[k * n : (k + 1) * n, (k + 1) * n : (k + 2) * n] = -gamma * A.T
            H[(k + 1) * n : (k + 2) * n, k * n : (k + 1) * n] = -gamma * A
        b[k * n : (k + 1) * n] = mu * C.T @ data.obs(t)
    b[:n] += gamma * A @ data.x
    sol = np.linalg.solve(H, b)
    X = np.empty((T, n))
    X[0] = data.x
    X[1:] = sol.reshape(m, n)
    return X
