"""Large-penalty behavior of the partially observed estimator.

With the observation weight tied to the dynamics weight (mu = gamma), the
estimate A^gamma approaches the minimum-norm transition matrix consistent
with the observations as gamma grows, and the deviation is linear in
1/gamma.  This module computes the coefficient of that linear term from
gamma-free quantities: a normalized gain recursion (the smoother's Riccati
sequence with the 1/gamma factors scaled out), the closed-loop transition
products built from it, and a dense linear solve for the correction matrix.
A sweep helper runs the alternating solver along a gamma grid and compares
the measured deviation against the predicted one.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ._validation import RankDeficientError, check_square
from .altmin import alternate
from .model import HyperParams, ObservedData, Trajectory, simulate_full

__all__ = [
    "NormalizedGains",
    "FirstOrderExpansion",
    "SweepRecord",
    "ExpansionDiagnostics",
    "normalized_gains",
    "first_order_correction",
    "expansion_validation",
]


@dataclass(frozen=True)
class NormalizedGains:
    """Gamma-free gain sequences of the limit smoother.

    ``sigmas[k]``, ``closed_loops[k]``, ``injections[k]`` hold the gain
    Sigma_t, the closed-loop transition Gamma_t and the output-injection
    weight Lambda_t at time ``t = k + 1``:

        Sigma_{t+1} = A (Sigma_t - Sigma_t C* W_t^{-1} C Sigma_t) A* + I
        Gamma_t     = A (I - Sigma_t C* W_t^{-1} C)
        Lambda_t    = C* W_t^{-1} C,     W_t = C Sigma_t C* + I

    with ``Sigma_1 = 0``.  These are the smoother gains under mu = gamma
    after scaling Sigma by gamma, so they carry no penalty weight.
    """

    sigmas: np.ndarray
    closed_loops: np.ndarray
    injections: np.ndarray

    @property
    def horizon(self) -> int:
        return self.sigmas.shape[0]

    def sigma(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.horizon:
            raise IndexError(f"time index {t} outside 1..{self.horizon}")
        return self.sigmas[t - 1]

    def closed_loop(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.horizon:
            raise IndexError(f"time index {t} outside 1..{self.horizon}")
        return self.closed_loops[t - 1]

    def injection(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.horizon:
            raise IndexError(f"time index {t} outside 1..{self.horizon}")
        return self.injections[t - 1]

    def phi(self, t: int, s: int) -> np.ndarray:
        """Transition product Gamma_t Gamma_{t-1} ... Gamma_s; identity for s = t+1."""
        if not (1 <= s <= t + 1 and t <= self.horizon):
            raise IndexError(f"product indices (t={t}, s={s}) outside range")
        n = self.sigmas.shape[1]
        out = np.eye(n)
        for k in range(s, t + 1):
            out = self.closed_loops[k - 1] @ out
        return out


def normalized_gains(Abar, C, T: int) -> NormalizedGains:
    """Run the gamma-free gain recursion for ``T`` steps from Sigma_1 = 0."""
    Abar = check_square(Abar, "Abar")
    C = np.asarray(C, dtype=float)
    n = Abar.shape[0]
    if C.ndim != 2 or C.shape[1] != n:
        raise ValueError(f"C must have {n} columns, got shape {C.shape}")
    if T < 2:
        raise ValueError(f"horizon T must be at least 2, got {T}")
    p = C.shape[0]
    sigmas = np.zeros((T, n, n))
    closed_loops = np.zeros((T, n, n))
    injections = np.zeros((T, n, n))
    Sig = np.zeros((n, n))
    for k in range(T):
        W = C @ Sig @ C.T + np.eye(p)
        CWinvC = C.T @ np.linalg.solve(W, C)
        sigmas[k] = Sig
        closed_loops[k] = Abar @ (np.eye(n) - Sig @ CWinvC)
        injections[k] = 0.5 * (CWinvC + CWinvC.T)
        Sig_next = Abar @ (Sig - Sig @ CWinvC @ Sig) @ Abar.T + np.eye(n)
        Sig = 0.5 * (Sig_next + Sig_next.T)
    return NormalizedGains(sigmas=sigmas, closed_loops=closed_loops, injections=injections)


@dataclass(frozen=True)
class FirstOrderExpansion:
    """First term of the large-gamma expansion around the limit pair.

    ``A^gamma ~ base_transition + correction / gamma`` and the states and
    adjoints of the estimator expand as
    ``x_t^gamma ~ xbar_t + state_corrections[t-1] / gamma`` and
    ``p_t^gamma ~ adjoints[t-1] + O(1/gamma)``.  ``drifts`` holds the
    forward sequence r_t feeding both: the state correction is
    ``r_t - Sigma_t p_t`` and the adjoint runs backward through the
    closed-loop transposes.
    """

    base: Trajectory
    gains: NormalizedGains
    correction: np.ndarray
    drifts: np.ndarray
    adjoints: np.ndarray
    state_corrections: np.ndarray

    def drift(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.base.T:
            raise IndexError(f"time index {t} outside 1..{self.base.T}")
        return self.drifts[t - 1]

    def adjoint(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.base.T:
            raise IndexError(f"time index {t} outside 1..{self.base.T}")
        return self.adjoints[t - 1]

    def state_correction(self, t: int) -> np.ndarray:
        if not 1 <= t <= self.base.T:
            raise IndexError(f"time index {t} outside 1..{self.base.T}")
        return self.state_corrections[t - 1]


def first_order_correction(Abar, C, x, T: int) -> FirstOrderExpansion:
    """Solve for the 1/gamma coefficient of the estimate around ``Abar``.

    The correction A1 solves the dense linear map

        Abar = -sum_{t,s} W_{t,s} A1 xbar_s xbar_t*

    where the weights W_{t,s} accumulate closed-loop products and injection
    gains over the tail of the horizon.  The n^2 unknowns are vectorized and
    solved directly; a rank-deficient map (no excitation, e.g. x = 0) raises
    ``RankDeficientError``.  The drift and adjoint sequences then follow by
    one forward and one backward recursion.
    """
    Abar = check_square(Abar, "Abar")
    n = Abar.shape[0]
    base = simulate_full(Abar, x, T)
    gains = normalized_gains(Abar, C, T)
    xbar = base.states

    # phis[s][u] = Phi(s, u) for u = 1..s+1, s = 1..T-1
    phis = [None] * T
    for s in range(1, T):
        row = [None] * (s + 2)
        row[s + 1] = np.eye(n)
        for u in range(s, 0, -1):
            row[u] = row[u + 1] @ gains.closed_loops[u - 1]
        phis[s] = row

    m = T - 1
    W = np.zeros((m, m, n, n))
    for t in range(1, T):
        for sig in range(1, T):
            acc = np.zeros((n, n))
            for s in range(max(sig, t), T):
                acc += phis[s][t + 1].T @ gains.injections[s] @ phis[s][sig + 1]
            W[t - 1, sig - 1] = acc

    # Abar_{ij} = -Op[(i,j),(k,l)] A1[k,l]
    op = np.einsum("tsik,sl,tj->ijkl", W, xbar[:m], xbar[:m]).reshape(n * n, n * n)
    svals = np.linalg.svd(op, compute_uv=False)
    tol = max(op.shape) * np.finfo(float).eps * (svals[0] if svals.size else 0.0)
    rank = int(np.sum(svals > tol))
    if rank < n * n:
        raise RankDeficientError(
            f"degenerate expansion: correction map has rank {rank} < {n * n}",
            rank=rank,
        )
    A1 = np.linalg.solve(op, -Abar.reshape(-1)).reshape(n, n)

    drifts = np.zeros((T, n))
    for t in range(1, T):
        drifts[t] = gains.closed_loops[t - 1] @ drifts[t - 1] + A1 @ xbar[t - 1]
    adjoints = np.zeros((T, n))
    adjoints[T - 1] = gains.injections[T - 1] @ drifts[T - 1]
    for t in range(T - 1, 0, -1):
        adjoints[t - 1] = (
            gains.closed_loops[t - 1].T @ adjoints[t]
            + gains.injections[t - 1] @ drifts[t - 1]
        )
    state_corrections = drifts - np.einsum("tij,tj->ti", gains.sigmas, adjoints)
    return FirstOrderExpansion(
        base=base,
        gains=gains,
        correction=A1,
        drifts=drifts,
        adjoints=adjoints,
        state_corrections=state_corrections,
    )


@dataclass(frozen=True)
class SweepRecord:
    """One grid point of the penalty sweep."""

    gamma: float
    transition: np.ndarray
    converged: bool
    reason: str
    n_iters: int
    distance_to_limit: float
    scaled_deviation: np.ndarray
    correction_error: float
    truncation_error: float

    def as_dict(self) -> dict:
        return {
            "gamma": self.gamma,
            "transition": self.transition.tolist(),
            "converged": self.converged,
            "reason": self.reason,
            "n_iters": self.n_iters,
            "distance_to_limit": self.distance_to_limit,
            "scaled_deviation": self.scaled_deviation.tolist(),
            "correction_error": self.correction_error,
            "truncation_error": self.truncation_error,
        }


@dataclass(frozen=True)
class ExpansionDiagnostics:
    """Sweep records plus the predicted first-order coefficient.

    ``truncation_slopes[k]`` is the log-log decay rate of
    ``|A^gamma - (Abar + A1/gamma)|`` between grid points k and k+1;
    values near 2 confirm the expansion captures the whole 1/gamma term.
    """

    correction: np.ndarray
    records: list = field(default_factory=list)

    @property
    def truncation_slopes(self) -> list:
        out = []
        for a, b in zip(self.records, self.records[1:]):
            if a.truncation_error <= 0 or b.truncation_error <= 0:
                out.append(float("nan"))
                continue
            out.append(
                float(
                    np.log(a.truncation_error / b.truncation_error)
                    / np.log(b.gamma / a.gamma)
                )
            )
        return out

    def as_dict(self) -> dict:
        return {
            "correction": self.correction.tolist(),
            "records": [r.as_dict() for r in self.records],
            "truncation_slopes": self.truncation_slopes,
        }


def expansion_validation(
    Abar,
    C,
    x,
    T: int,
    gamma_grid,
    opts: HyperParams | None = None,
) -> ExpansionDiagnostics:
    """Sweep the alternating solver along ``gamma_grid`` with mu = gamma.

    Observations are generated exactly from ``Abar`` so the limit of the
    estimate is the minimum-norm consistent transition.  Each grid point is
    warm-started from the previous one.  Non-convergence at a grid point is
    recorded in that entry, not raised.
    """
    Abar = check_square(Abar, "Abar")
    grid = [float(g) for g in gamma_grid]
    if not grid:
        raise ValueError("gamma_grid must be non-empty")
    if any(g <= 0 for g in grid):
        raise ValueError("gamma_grid entries must be positive")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise ValueError("gamma_grid must be strictly increasing")
    if opts is None:
        opts = HyperParams(max_iters=100_000, grad_tol=1e-11)
    C = np.asarray(C, dtype=float)
    base = simulate_full(Abar, x, T)
    data = ObservedData(x=base.states[0], C=C, observations=base.states[1:] @ C.T)
    expansion = first_order_correction(Abar, C, x, T)
    A1 = expansion.correction

    records = []
    A_start = None
    for g in grid:
        result = alternate(data, g, g, rho=0.0, opts=opts, A0=A_start)
        A_g = result.transition
        A_start = A_g
        scaled = g * (A_g - Abar)
        records.append(
            SweepRecord(
                gamma=g,
                transition=A_g,
                converged=result.report.converged,
                reason=result.report.reason,
                n_iters=result.report.n_iters,
                distance_to_limit=float(np.linalg.norm(A_g - Abar)),
                scaled_deviation=scaled,
                correction_error=float(np.linalg.norm(scaled - A1)),
                truncation_error=float(np.linalg.norm(A_g - Abar - A1 / g)),
            )
        )
    return ExpansionDiagnostics(correction=A1, records=records)
