"""Identification from fully observed trajectories.

All routines estimate the transition matrix A from a state sequence
``x_1..x_T`` believed to follow ``x_{t+1} = A x_t``.  The regularized
objective is

    J_gamma(A) = 1/2 tr(A A*) + gamma/2 sum_t |x_{t+1} - A x_t|^2 ,

whose unique minimizer has the closed form computed by :func:`ridge`.  The
same minimizer is reachable through dual coefficients, plain gradient
descent, rank-one recursive updates in the horizon, and a large-gamma
Neumann expansion around the unregularized least squares solution; each
route is exposed separately because they trade accuracy, cost, and
streaming ability differently.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
import scipy.linalg

from ._validation import RankDeficientError, check_gamma
from .model import DescentReport, HyperParams, Trajectory

__all__ = [
    "DualSolution",
    "RidgeState",
    "MinNormDiagnostics",
    "least_squares",
    "ridge",
    "dual_solve",
    "objective_and_gradient",
    "step_bound",
    "gradient_descent",
    "recursive_update",
    "neumann_expansion",
    "min_norm_limit",
]

# Rank-one updates accumulate rounding drift, so the recursive ridge state is
# refactorized from its accumulated Gram matrix after this many updates.
_REFACTOR_EVERY = 64


def _split(traj: Trajectory):
    """Current states Z (rows x_1..x_{T-1}) and successors Xp (rows x_2..x_T)."""
    return traj.states[:-1], traj.states[1:]


def _gram(traj: Trajectory):
    """Gram matrix S = sum x_t x_t* and cross moment R = sum x_{t+1} x_t*."""
    Z, Xp = _split(traj)
    return Z.T @ Z, Xp.T @ Z


def least_squares(traj: Trajectory) -> np.ndarray:
    """Unregularized estimate A = (sum x_{t+1} x_t*)(sum x_t x_t*)^{-1}.

    Raises
    ------
    RankDeficientError
        When the states x_1..x_{T-1} do not span R^n, in which case the
        normal equations are singular and ridge or the pseudo-inverse limit
        should be used instead.
    """
    Z, Xp = _split(traj)
    s = np.linalg.svd(Z, compute_uv=False)
    rank = int(np.sum(s > 1e-12 * s[0])) if s[0] > 0 else 0
    if rank < traj.n:
        raise RankDeficientError(
            f"rank-deficient data: the Gram matrix has numerical rank {rank} "
            f"but the state dimension is {traj.n}",
            rank,
        )
    S, R = Z.T @ Z, Xp.T @ Z
    return scipy.linalg.solve(S, R.T, assume_a="pos").T


def ridge(traj: Trajectory, gamma: float) -> np.ndarray:
    """Minimizer of J_gamma: A = (sum x_{t+1} x_t*)(I/gamma + sum x_t x_t*)^{-1}.

    Well defined for every trajectory; the regularization keeps the solve
    positive definite even when the data is rank deficient.
    """
    gamma = check_gamma(gamma)
    S, R = _gram(traj)
    M = S + np.eye(traj.n) / gamma
    cf = scipy.linalg.cho_factor(M)
    return scipy.linalg.cho_solve(cf, R.T).T


@dataclass(frozen=True)
class DualSolution:
    """Dual coefficients p_2..p_T and the transition they reconstruct.

    ``coefficients`` stacks p_{t+1} for t = 1..T-1 as rows; the estimate is
    A = -sum_t p_{t+1} x_t*, and ``dual_value`` is the dual payoff at the
    coefficients, which equals -J_gamma(A) at the optimum.
    """

    coefficients: np.ndarray
    transition: np.ndarray
    dual_value: float

    def coefficient(self, t: int) -> np.ndarray:
        """Dual coefficient p_t at 1-based time ``t`` (``2 <= t <= T+1`` rows)."""
        if not 2 <= t <= self.coefficients.shape[0] + 1:
            raise IndexError(
                f"dual coefficient index {t} outside 2..{self.coefficients.shape[0] + 1}"
            )
        return self.coefficients[t - 2]


def dual_solve(traj: Trajectory, gamma: float) -> DualSolution:
    """Ridge through its dual: one (T-1) x (T-1) kernel solve.

    The coefficients solve p_{t+1}/gamma + sum_s (x_t . x_s) p_{s+1} = -x_{t+1},
    so the system size depends on the horizon rather than the state dimension,
    which is the cheaper route when T - 1 < n.
    """
    gamma = check_gamma(gamma)
    Z, Xp = _split(traj)
    G = Z @ Z.T
    M = G + np.eye(G.shape[0]) / gamma
    cf = scipy.linalg.cho_factor(M)
    P = -scipy.linalg.cho_solve(cf, Xp)
    A = -P.T @ Z
    value = (
        float(np.sum(P * P)) / (2.0 * gamma)
        + 0.5 * float(np.sum(P * (G @ P)))
        + float(np.sum(Xp * P))
    )
    return DualSolution(coefficients=P, transition=A, dual_value=value)


def objective_and_gradient(A, traj: Trajectory, gamma: float):
    """Value and gradient of J_gamma at A.

    The gradient has the closed form DJ(A) = A (I + gamma S) - gamma R with
    S, R the Gram and cross moments, so no autodiff is involved.
    """
    gamma = check_gamma(gamma)
    A = np.asarray(A, dtype=float)
    Z, Xp = _split(traj)
    resid = Xp - Z @ A.T
    J = 0.5 * float(np.sum(A * A)) + 0.5 * gamma * float(np.sum(resid * resid))
    S, R = Z.T @ Z, Xp.T @ Z
    DJ = A @ (np.eye(traj.n) + gamma * S) - gamma * R
    return J, DJ


def step_bound(traj: Trajectory, gamma: float) -> float:
    """Largest safe constant step for gradient descent on J_gamma.

    Steps rho with 0 < rho < 2 / (1 + gamma sum_t |x_t|^2) give monotone
    convergence; at or beyond the bound the iteration may oscillate or
    diverge.
    """
    gamma = check_gamma(gamma)
    Z, _ = _split(traj)
    return 2.0 / (1.0 + gamma * float(np.sum(Z * Z)))


def gradient_descent(traj: Trajectory, gamma: float, opts: HyperParams):
    """Constant-step gradient descent on J_gamma from A = 0.

    ``opts.rho`` is the step; 0 selects half the stability bound.  Returns
    the final iterate and a :class:`DescentReport`; an objective increase is
    recorded in ``report.diverged`` rather than raised, so deliberately
    oversized steps can be studied.
    """
    gamma = check_gamma(gamma)
    rho = opts.rho if opts.rho > 0 else 0.5 * step_bound(traj, gamma)
    A = np.zeros((traj.n, traj.n))
    report = DescentReport()
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(opts.max_iters):
            J, DJ = objective_and_gradient(A, traj, gamma)
            gnorm = float(np.linalg.norm(DJ))
            # Flag real increases only; a plateaued objective jitters at the
            # last few ulps once the iterates have converged.
            if report.objectives:
                prev = report.objectives[-1]
                if J > prev + 1e-12 * (1.0 + abs(prev)):
                    report.diverged = True
            report.objectives.append(J)
            report.grad_norms.append(gnorm)
            if not np.isfinite(J):
                report.reason = "objective overflow"
                return A, report
            if gnorm <= opts.grad_tol:
                report.converged = True
                report.reason = "gradient tolerance reached"
                return A, report
            report.steps.append(rho)
            A = A - rho * DJ
    report.reason = "max_iters reached"
    return A, report


@dataclass(frozen=True)
class RidgeState:
    """Ridge estimate maintained recursively in the horizon.

    ``gain`` is B_T = (I/gamma + sum_{t<T} x_t x_t*)^{-1} and ``estimate`` is
    A_T = (sum_{t<T} x_{t+1} x_t*) B_T, identical to the batch ridge solution
    on the first T states.  ``gram`` and ``cross`` carry the running moments
    so the gain can be refactorized exactly after many rank-one updates.
    """

    gamma: float
    horizon: int
    gain: np.ndarray
    estimate: np.ndarray
    gram: np.ndarray
    cross: np.ndarray
    updates_since_refactor: int = 0

    @classmethod
    def from_trajectory(cls, traj: Trajectory, gamma: float) -> "RidgeState":
        """Batch-build the state from a trajectory prefix x_1..x_T."""
        gamma = check_gamma(gamma)
        S, R = _gram(traj)
        cf = scipy.linalg.cho_factor(S + np.eye(traj.n) / gamma)
        B = scipy.linalg.cho_solve(cf, np.eye(traj.n))
        return cls(
            gamma=gamma,
            horizon=traj.T,
            gain=B,
            estimate=R @ B,
            gram=S,
            cross=R,
        )


def recursive_update(state: RidgeState, x_T, x_next) -> RidgeState:
    """Extend a :class:`RidgeState` with the transition (x_T, x_{T+1}).

    One Sherman-Morrison update of the gain and a rank-one correction of the
    estimate, O(n^2) per step.  Every ``64`` updates both are rebuilt from
    the accumulated moments to cap rounding drift.
    """
    x_T = np.asarray(x_T, dtype=float)
    x_next = np.asarray(x_next, dtype=float)
    n = state.gain.shape[0]
    if x_T.shape != (n,) or x_next.shape != (n,):
        raise ValueError(
            f"update states must have shape ({n},), got {x_T.shape} and {x_next.shape}"
        )
    S = state.gram + np.outer(x_T, x_T)
    R = state.cross + np.outer(x_next, x_T)
    count = state.updates_since_refactor + 1
    if count >= _REFACTOR_EVERY:
        cf = scipy.linalg.cho_factor(S + np.eye(n) / state.gamma)
        B = scipy.linalg.cho_solve(cf, np.eye(n))
        A = R @ B
        count = 0
    else:
        u = state.gain @ x_T
        B = state.gain - np.outer(u, u) / (1.0 + float(x_T @ u))
        B = 0.5 * (B + B.T)
        A = state.estimate + np.outer(x_next - state.estimate @ x_T, x_T) @ B
    return replace(
        state,
        horizon=state.horizon + 1,
        gain=B,
        estimate=A,
        gram=S,
        cross=R,
        updates_since_refactor=count,
    )


def neumann_expansion(traj: Trajectory, gamma: float, order: int) -> np.ndarray:
    """Large-gamma approximation of ridge around the least squares solution.

    Expands (I/gamma + S)^{-1} as S^{-1} sum_j (-S^{-1}/gamma)^j truncated at
    ``order``, giving A_LS (I + sum_{j=1..order} (-1)^j gamma^{-j} S^{-j}).
    Requires full-rank data; accurate once gamma is large against 1 over the
    smallest Gram eigenvalue.
    """
    gamma = check_gamma(gamma)
    if order < 0:
        raise ValueError(f"order must be non-negative, got {order}")
    A_ls = least_squares(traj)
    S, _ = _gram(traj)
    Sinv = scipy.linalg.solve(S, np.eye(traj.n), assume_a="pos")
    correction = np.eye(traj.n)
    term = np.eye(traj.n)
    for _ in range(order):
        term = term @ (-Sinv / gamma)
        correction = correction + term
    return A_ls @ correction


@dataclass(frozen=True)
class MinNormDiagnostics:
    """Ridge sweep against the minimum-norm consistent transition.

    ``limit`` is (sum x_{t+1} x_t*)(sum x_t x_t*)^+, the minimum Frobenius
    norm matrix consistent with the data; ``distances[k]`` is the Frobenius
    distance of the ridge estimate at ``gammas[k]`` from it.
    """

    gammas: tuple
    estimates: tuple
    distances: tuple
    limit: np.ndarray


def min_norm_limit(traj: Trajectory, gammas) -> MinNormDiagnostics:
    """Sweep ridge over ``gammas`` and report convergence to the pseudo-inverse limit.

    Useful on rank-deficient trajectories, where least squares is undefined
    but the ridge family still selects the minimum-norm consistent matrix as
    gamma grows.
    """
    gammas = tuple(sorted(check_gamma(g) for g in gammas))
    if not gammas:
        raise ValueError("gammas must be a non-empty collection")
    S, R = _gram(traj)
    limit = R @ np.linalg.pinv(S, hermitian=True)
    estimates = tuple(ridge(traj, g) for g in gammas)
    distances = tuple(float(np.linalg.norm(A - limit)) for A in estimates)
    return MinNormDiagnostics(
        gammas=gammas, estimates=estimates, distances=distances, limit=limit
    )
