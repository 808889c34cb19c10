"""Identification from partial observations y_t = C x_t.

The unknowns are the transition matrix and the control-like slack
``v_t = x_{t+1} - A x_t`` that lets the states move off the model; together
``Z = (A, v(.))`` minimizes

    J(Z) = 1/2 tr(A A*) + gamma/2 sum_t |v_t|^2
         + mu/2 sum_{t=2}^T |y_t - C x_t(Z)|^2 ,

a nonconvex problem because the states depend on Z through the dynamics.
Gradients come from one adjoint sweep rather than autodiff, the exact
Hessian is available as a quadratic form for curvature estimates, and every
descent iterate provably stays inside a data-determined Frobenius ball.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._validation import RankDeficientError, check_gamma, check_mu, check_square
from .fullobs import ridge
from .model import DescentReport, HyperParams, ObservedData, Trajectory

__all__ = [
    "DecisionPoint",
    "lift_estimator",
    "objective_and_gradient",
    "hessian_quadratic_form",
    "trust_ball",
    "gradient_descent",
    "stationarity_residual",
]


@dataclass(frozen=True)
class DecisionPoint:
    """A transition candidate A together with slack controls v_1..v_{T-1}.

    ``v[k]`` is the slack entering the transition from time k+1 to k+2.
    """

    A: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        A = check_square(self.A, "A")
        v = np.asarray(self.v, dtype=float)
        if v.ndim != 2 or v.shape[1] != A.shape[0]:
            raise ValueError(
                f"v must be (T-1, {A.shape[0]}), got shape {v.shape}"
            )
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "v", v)

    @classmethod
    def zero(cls, n: int, T: int) -> "DecisionPoint":
        return cls(A=np.zeros((n, n)), v=np.zeros((T - 1, n)))

    def norm(self) -> float:
        return float(np.sqrt(np.sum(self.A * self.A) + np.sum(self.v * self.v)))

    def axpy(self, a: float, other: "DecisionPoint") -> "DecisionPoint":
        """Return self + a * other."""
        return DecisionPoint(A=self.A + a * other.A, v=self.v + a * other.v)

    def scale(self, a: float) -> "DecisionPoint":
        return DecisionPoint(A=a * self.A, v=a * self.v)

    def inner(self, other: "DecisionPoint") -> float:
        return float(np.sum(self.A * other.A) + np.sum(self.v * other.v))


def lift_estimator(data: ObservedData, gamma: float) -> np.ndarray:
    """Ridge on states lifted through the pseudo-inverse of C.

    Maps each observation back by x_t = C*(C C*)^{-1} y_t (t >= 2, the
    initial state is known) and runs the fully observed ridge estimate on
    the lifted trajectory.  Requires independent observation rows; exact
    when C is square invertible, a heuristic otherwise.
    """
    gamma = check_gamma(gamma)
    C = data.C
    s = np.linalg.svd(C, compute_uv=False)
    rank = int(np.sum(s > 1e-12 * s[0])) if s[0] > 0 else 0
    if rank < data.p:
        raise RankDeficientError(
            f"observation rows dependent: C C* has numerical rank {rank} "
            f"but there are {data.p} observation rows",
            rank,
        )
    lifted = np.empty((data.T, data.n))
    lifted[0] = data.x
    lifted[1:] = np.linalg.solve(C @ C.T, data.observations.T).T @ C
    return ridge(Trajectory(lifted), gamma)


def _forward(A: np.ndarray, v: np.ndarray, x: np.ndarray) -> np.ndarray:
    T = v.shape[0] + 1
    X = np.empty((T, x.shape[0]))
    X[0] = x
    for t in range(T - 1):
        X[t + 1] = A @ X[t] + v[t]
    return X


def _adjoint(A: np.ndarray, states: np.ndarray, data: ObservedData, mu: float) -> np.ndarray:
    """Backward sweep p_T, ..., p_2, with p_1 = A* p_2 appended by convention."""
    C = data.C
    T = data.T
    P = np.zeros((T, data.n))
    resid = data.observations - states[1:] @ C.T  # rows t = 2..T
    P[T - 1] = -mu * C.T @ resid[T - 2]
    for t in range(T - 1, 1, -1):
        P[t - 1] = A.T @ P[t] - mu * C.T @ resid[t - 2]
    P[0] = A.T @ P[1]
    return P


def objective_and_gradient(Z: DecisionPoint, data: ObservedData, gamma: float, mu: float):
    """J(Z), its gradient, and the states/adjoints behind it.

    The gradient is assembled from one forward and one backward sweep:

        D_A J = A + sum_{t=1}^{T-1} p_{t+1} x_t*
        D_v J = gamma v_t + p_{t+1} .

    Returns ``(value, gradient, states, adjoints)``; the gradient is itself
    a :class:`DecisionPoint`.
    """
    gamma, mu = check_gamma(gamma), check_mu(mu)
    if Z.A.shape[0] != data.n or Z.v.shape[0] != data.T - 1:
        raise ValueError(
            f"decision point sized for n={Z.A.shape[0]}, T={Z.v.shape[0] + 1}; "
            f"data has n={data.n}, T={data.T}"
        )
    states = _forward(Z.A, Z.v, data.x)
    resid = data.observations - states[1:] @ data.C.T
    J = (
        0.5 * float(np.sum(Z.A * Z.A))
        + 0.5 * gamma * float(np.sum(Z.v * Z.v))
        + 0.5 * mu * float(np.sum(resid * resid))
    )
    P = _adjoint(Z.A, states, data, mu)
    dA = Z.A + P[1:].T @ states[:-1]
    dv = gamma * Z.v + P[1:]
    return J, DecisionPoint(A=dA, v=dv), states, P


def hessian_quadratic_form(
    Z: DecisionPoint, Zt: DecisionPoint, data: ObservedData, gamma: float, mu: float
) -> float:
    """Exact curvature <D^2 J(Z) Zt, Zt> along a direction Zt.

    Uses the tangent dynamics xt_1 = 0, xt_{t+1} = A xt_t + At x_t + vt_t and
    the adjoints at Z:

        tr(At At*) + 2 sum_t p_{t+1} . (At xt_t)
        + gamma sum_t |vt_t|^2 + mu sum_{t=2}^T |C xt_t|^2 .

    Can be negative; the objective is nonconvex in Z.
    """
    _, _, states, P = objective_and_gradient(Z, data, gamma, mu)
    xt = _tangent_states(Z.A, Zt, states)
    Cxt = xt[1:] @ data.C.T
    return (
        float(np.sum(Zt.A * Zt.A))
        + 2.0 * float(np.sum(P[1:] * (xt[:-1] @ Zt.A.T)))
        + gamma * float(np.sum(Zt.v * Zt.v))
        + mu * float(np.sum(Cxt * Cxt))
    )


def _tangent_states(A: np.ndarray, Zt: DecisionPoint, states: np.ndarray) -> np.ndarray:
    xt = np.zeros_like(states)
    for t in range(states.shape[0] - 1):
        xt[t + 1] = A @ xt[t] + Zt.A @ states[t] + Zt.v[t]
    return xt


def _hessian_apply(
    Z: DecisionPoint,
    Zt: DecisionPoint,
    data: ObservedData,
    gamma: float,
    mu: float,
    states: np.ndarray,
    P: np.ndarray,
) -> DecisionPoint:
    """D^2 J(Z) applied to Zt, via tangent forward and backward sweeps."""
    C = data.C
    T = data.T
    xt = _tangent_states(Z.A, Zt, states)
    CtC = C.T @ C
    Pt = np.zeros((T, data.n))
    Pt[T - 1] = mu * CtC @ xt[T - 1]
    for t in range(T - 1, 1, -1):
        Pt[t - 1] = Z.A.T @ Pt[t] + Zt.A.T @ P[t] + mu * CtC @ xt[t - 1]
    dA = Zt.A + Pt[1:].T @ states[:-1] + P[1:].T @ xt[:-1]
    dv = gamma * Zt.v + Pt[1:]
    return DecisionPoint(A=dA, v=dv)


def trust_ball(data: ObservedData, gamma: float, mu: float) -> float:
    """Radius M = sqrt(mu / min(1, gamma) * sum_t |y_t|^2).

    Every point with J(Z) <= J(0) lies inside the Frobenius ball of this
    radius, so monotone descent started at Z = 0 never leaves it.
    """
    gamma, mu = check_gamma(gamma), check_mu(mu)
    return float(
        np.sqrt(mu / min(1.0, gamma) * np.sum(data.observations * data.observations))
    )


def _estimate_curvature_bound(
    data: ObservedData, gamma: float, mu: float, seed, iters: int = 20
) -> float:
    """Dominant curvature magnitude at Z = 0 by power iteration."""
    rng = np.random.default_rng(0 if seed is None else seed)
    Z0 = DecisionPoint.zero(data.n, data.T)
    _, _, states, P = objective_and_gradient(Z0, data, gamma, mu)
    Zt = DecisionPoint(
        A=rng.standard_normal((data.n, data.n)),
        v=rng.standard_normal((data.T - 1, data.n)),
    )
    lam = 1.0
    for _ in range(iters):
        HZt = _hessian_apply(Z0, Zt, data, gamma, mu, states, P)
        lam = HZt.norm()
        if lam == 0.0:
            return 1.0
        Zt = HZt.scale(1.0 / lam)
    return lam


def gradient_descent(
    data: ObservedData,
    gamma: float,
    mu: float,
    opts: HyperParams,
    step_mode: str = "armijo",
):
    """Descend J from Z = 0; returns the final point and a report.

    ``step_mode="armijo"`` (default) backtracks from a unit trial step,
    halving until the decrease is at least 1e-4 of step times squared
    gradient norm, which guarantees a non-increasing objective.
    ``step_mode="fixed"`` uses the constant step 1 over a power-iteration
    estimate of the curvature at the start; cheaper per iteration but with
    no safeguard.
    """
    gamma, mu = check_gamma(gamma), check_mu(mu)
    if step_mode not in ("armijo", "fixed"):
        raise ValueError(f"step_mode must be 'armijo' or 'fixed', got {step_mode!r}")
    Z = DecisionPoint.zero(data.n, data.T)
    report = DescentReport()
    fixed_step = (
        1.0 / _estimate_curvature_bound(data, gamma, mu, opts.seed)
        if step_mode == "fixed"
        else None
    )
    J, D, _, _ = objective_and_gradient(Z, data, gamma, mu)
    trial = 1.0
    for _ in range(opts.max_iters):
        gnorm = D.norm()
        if report.objectives:
            prev = report.objectives[-1]
            if J > prev + 1e-12 * (1.0 + abs(prev)):
                report.diverged = True
        report.objectives.append(J)
        report.grad_norms.append(gnorm)
        report.iterate_norms.append(Z.norm())
        if gnorm <= opts.grad_tol:
            report.converged = True
            report.reason = "gradient tolerance reached"
            return Z, report
        if step_mode == "fixed":
            step = fixed_step
            Z_next = Z.axpy(-step, D)
            J_next, D_next, _, _ = objective_and_gradient(Z_next, data, gamma, mu)
        else:
            step = min(2.0 * trial, 1.0e8)
            while True:
                Z_next = Z.axpy(-step, D)
                J_next, D_next, _, _ = objective_and_gradient(Z_next, data, gamma, mu)
                if J_next <= J - 1e-4 * step * gnorm * gnorm:
                    break
                step *= 0.5
                if step < 1e-18:
                    report.reason = "line search failed"
                    return Z, report
            trial = step
        report.steps.append(step)
        Z, J, D = Z_next, J_next, D_next
    report.reason = "max_iters reached"
    return Z, report


def stationarity_residual(
    A, states: np.ndarray, adjoints: np.ndarray, data: ObservedData, gamma: float, mu: float
) -> float:
    """How far a triple (A, x, p) is from satisfying the optimality system.

    Largest violation among the gradient relation A = -sum p_{t+1} x_t*, the
    dynamics x_{t+1} = A x_t - p_{t+1}/gamma, the adjoint recursion at
    t = 2..T-1, and the terminal condition on p_T.  Zero exactly at
    stationary points of J.
    """
    A = check_square(A, "A")
    gamma, mu = check_gamma(gamma), check_mu(mu)
    C = data.C
    resid = data.observations - states[1:] @ C.T
    worst = float(np.linalg.norm(A + adjoints[1:].T @ states[:-1]))
    dyn = states[1:] - states[:-1] @ A.T + adjoints[1:] / gamma
    worst = max(worst, float(np.max(np.linalg.norm(dyn, axis=1))))
    for t in range(2, data.T):
        lhs = adjoints[t - 1] - (A.T @ adjoints[t] - mu * C.T @ resid[t - 2])
        worst = max(worst, float(np.linalg.norm(lhs)))
    worst = max(
        worst, float(np.linalg.norm(adjoints[-1] + mu * C.T @ resid[-1]))
    )
    return worst
