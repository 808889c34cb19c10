"""Scikit-learn style front ends for the identification routines.

Each estimator wraps one solver: construction takes the hyperparameters,
``fit`` takes the data and stores the result in trailing-underscore
attributes, ``predict`` propagates states one step through the fitted
transition matrix.  Fully observed estimators accept a ``Trajectory`` or a
plain ``(T, n)`` array of states; partially observed ones take an
``ObservedData``.  All of them compose with ``get_params`` / ``set_params``
and therefore with model-selection utilities.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import altmin, fullobs, partialobs
from .model import HyperParams, ObservedData, Trajectory

__all__ = [
    "LeastSquaresIdentifier",
    "RidgeIdentifier",
    "DualIdentifier",
    "GradientDescentIdentifier",
    "NeumannIdentifier",
    "RecursiveRidgeIdentifier",
    "LiftIdentifier",
    "AdjointDescentIdentifier",
    "AlternatingIdentifier",
]


def _as_trajectory(X) -> Trajectory:
    if isinstance(X, Trajectory):
        return X
    return Trajectory(np.asarray(X, dtype=float))


def _as_observed(X) -> ObservedData:
    if not isinstance(X, ObservedData):
        raise TypeError(
            "partially observed estimators need an ObservedData "
            f"(initial state, output map, observations), got {type(X).__name__}"
        )
    return X


class _TransitionEstimator(BaseEstimator):
    """One-step prediction through a fitted ``transition_`` matrix."""

    def predict(self, X):
        """Propagate states one step: row k of the result is A @ X[k]."""
        check_is_fitted(self, "transition_")
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            return self.transition_ @ X
        return X @ self.transition_.T


class LeastSquaresIdentifier(_TransitionEstimator):
    """Unpenalized least-squares fit of the transition matrix.

    Requires the states to span the full space; otherwise fit raises the
    rank error from the underlying solver.

    Attributes
    ----------
    transition_ : ndarray of shape (n, n)
    """

    def fit(self, X, y=None):
        self.transition_ = fullobs.least_squares(_as_trajectory(X))
        return self


class RidgeIdentifier(_TransitionEstimator):
    """Penalized fit ``A (I/gamma + S) = R``; well posed for any data.

    Parameters
    ----------
    gamma : float, default=1.0
        Penalty weight; larger values trust the data more.

    Attributes
    ----------
    transition_ : ndarray of shape (n, n)
    """

    def __init__(self, gamma=1.0):
        self.gamma = gamma

    def fit(self, X, y=None):
        self.transition_ = fullobs.ridge(_as_trajectory(X), self.gamma)
        return self


class DualIdentifier(_TransitionEstimator):
    """Ridge fit computed through its kernel dual.

    Solves for the T-1 adjoint coefficient vectors instead of the matrix,
    then reassembles the transition.  Exposes the coefficients and the
    attained dual value alongside the estimate.

    Attributes
    ----------
    transition_ : ndarray of shape (n, n)
    coefficients_ : ndarray of shape (T - 1, n)
    dual_value_ : float
    """

    def __init__(self, gamma=1.0):
        self.gamma = gamma

    def fit(self, X, y=None):
        sol = fullobs.dual_solve(_as_trajectory(X), self.gamma)
        self.transition_ = sol.transition
        self.coefficients_ = sol.coefficients
        self.dual_value_ = sol.dual_value
        return self


class GradientDescentIdentifier(_TransitionEstimator):
    """Constant-step gradient descent on the penalized objective.

    Parameters
    ----------
    gamma : float, default=1.0
    step : float or None, default=None
        Step size; None selects half the monotonicity bound.
    max_iters : int, default=1000
    grad_tol : float, default=1e-8

    Attributes
    ----------
    transition_ : ndarray of shape (n, n)
    report_ : DescentReport
    """

    def __init__(self, gamma=1.0, step=None, max_iters=1000, grad_tol=1e-8):
        self.gamma = gamma
        self.step = step
        self.max_iters = max_iters
        self.grad_tol = grad_tol

    def fit(self, X, y=None):
        opts = HyperParams(
            gamma=self.gamma,
            rho=self.step if self.step is not None else 0.0,
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
        )
        self.transition_, self.report_ = fullobs.gradient_descent(
            _as_trajectory(X), self.gamma, opts
        )
        return self


class NeumannIdentifier(_TransitionEstimator):
    """Truncated large-gamma series around the least-squares solution.

    Parameters
    ----------
    gamma : float, default=1.0
    order : int, default=1
        Truncation order; 0 reproduces plain least squares.
    """

    def __init__(self, gamma=1.0, order=1):
        self.gamma = gamma
        self.order = order

    def fit(self, X, y=None):
        self.transition_ = fullobs.neumann_expansion(
            _as_trajectory(X), self.gamma, self.order
        )
        return self


class RecursiveRidgeIdentifier(_TransitionEstimator):
    """Ridge fit maintained under horizon extensions.

    ``fit`` builds the estimate from an initial trajectory; ``update``
    appends one transition (x_T, x_{T+1}) in O(n^2) without re-solving.

    Attributes
    ----------
    transition_ : ndarray of shape (n, n)
    state_ : RidgeState
        Running moments and factorization for further updates.
    """

    def __init__(self, gamma=1.0):
        self.gamma = gamma

    def fit(self, X, y=None):
        self.state_ = fullobs.RidgeState.from_trajectory(
            _as_trajectory(X), self.gamma
        )
        self.transition_ = self.state_.estimate
        return self

    def update(self, x_last, x_next):
        """Extend the fitted horizon by the transition (x_last, x_next)."""
        check_is_fitted(self, "state_")
        self.state_ = fullobs.recursive_update(self.state_, x_last, x_next)
        self.transition_ = self.state_.estimate
        return self


class LiftIdentifier(_TransitionEstimator):
    """Closed-form estimate from partial observations with wide-rank output.

    Lifts each observation back to a state through the output map's
    pseudo-inverse, then ridge-fits the lifted trajectory.  Requires the
    observation rows to be linearly independent.
    """

    def __init__(self, gamma=1.0):
        self.gamma = gamma

    def fit(self, X, y=None):
        self.transition_ = partialobs.lift_estimator(_as_observed(X), self.gamma)
        return self


class AdjointDescentIdentifier(_TransitionEstimator):
    """Gradient descent on the joint (transition, control) objective.

    The decision variable pairs the transition matrix with per-step control
    corrections; gradients come from one backward adjoint pass per iterate.

    Parameters
    ----------
    gamma : float, default=1.0
        Weight on the control energy.
    mu : float, default=1.0
        Weight on the observation mismatch.
    max_iters : int, default=1000
    grad_tol : float, default=1e-8
    step_mode : {"armijo", "fixed"}, default="armijo"
    seed : int or None, default=None
        Seeds the curvature probe used by the fixed step.

    Attributes
    ----------
    transition_ : ndarray of shape (n, n)
    controls_ : ndarray of shape (T - 1, n)
    report_ : DescentReport
    """

    def __init__(
        self,
        gamma=1.0,
        mu=1.0,
        max_iters=1000,
        grad_tol=1e-8,
        step_mode="armijo",
        seed=None,
    ):
        self.gamma = gamma
        self.mu = mu
        self.max_iters = max_iters
        self.grad_tol = grad_tol
        self.step_mode = step_mode
        self.seed = seed

    def fit(self, X, y=None):
        data = _as_observed(X)
        opts = HyperParams(
            gamma=self.gamma,
            mu=self.mu,
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
            seed=self.seed,
        )
        Z, report = partialobs.gradient_descent(
            data, self.gamma, self.mu, opts, step_mode=self.step_mode
        )
        self.transition_ = Z.A
        self.controls_ = Z.v
        self.report_ = report
        return self


class AlternatingIdentifier(_TransitionEstimator):
    """Alternating state/transition minimization for partial observations.

    Each sweep solves the state block exactly with the decoupled smoother,
    then updates the transition in closed form with proximal damping rho.

    Parameters
    ----------
    gamma : float, default=1.0
    mu : float, default=1.0
    rho : float, default=0.0
        Proximal damping on the transition update.
    max_iters : int, default=1000
    grad_tol : float, default=1e-8

    Attributes
    ----------
    transition_ : ndarray of shape (n, n)
    states_ : ndarray of shape (T, n)
        Smoothed states at the final transition.
    adjoints_ : ndarray of shape (T, n)
    report_ : DescentReport
    ledger_ : list of LedgerEntry
        Exact per-sweep objective-drop decomposition.
    """

    def __init__(self, gamma=1.0, mu=1.0, rho=0.0, max_iters=1000, grad_tol=1e-8):
        self.gamma = gamma
        self.mu = mu
        self.rho = rho
        self.max_iters = max_iters
        self.grad_tol = grad_tol

    def fit(self, X, y=None):
        data = _as_observed(X)
        opts = HyperParams(
            gamma=self.gamma,
            mu=self.mu,
            rho=self.rho,
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
        )
        result = altmin.alternate(data, self.gamma, self.mu, self.rho, opts)
        self.transition_ = result.transition
        self.states_ = result.states
        self.adjoints_ = result.adjoints
        self.report_ = result.report
        self.ledger_ = result.ledger
        return self
