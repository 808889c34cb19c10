"""Top-level acceptance checks, one per shipped guarantee.

Each test is self-contained and pins the tolerances the library promises.
They run against randomly drawn desk-scale instances with fixed seeds, so a
failure here means a broken guarantee, not an unlucky draw.
"""

import time

import numpy as np
import pytest

from linsysid.altmin import alternate
from linsysid.asymptotics import expansion_validation, first_order_correction, normalized_gains
from linsysid.fullobs import (
    RidgeState,
    dual_solve,
    gradient_descent,
    min_norm_limit,
    neumann_expansion,
    recursive_update,
    ridge,
    step_bound,
)
from linsysid.model import HyperParams, ObservedData, Trajectory, simulate_full, simulate_observed
from linsysid.partialobs import gradient_descent as descend_partial
from linsysid.partialobs import (
    DecisionPoint,
    hessian_quadratic_form,
    objective_and_gradient,
    stationarity_residual,
    trust_ball,
)
from linsysid.realization import (
    SystemRealization,
    markov_params,
    minimal_realization,
    silverman_order,
    structure_matrices,
)
from linsysid.smoother import riccati_gains, smoother_solve
from oracles import dense_state_solve


def random_trajectory(rng, n, T, radius=0.85):
    """Decaying random trajectory; keeps descent conditioning moderate."""
    A = rng.standard_normal((n, n))
    A *= radius / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-6)
    x = rng.standard_normal(n)
    return simulate_full(A, x, T)


def random_observed(rng, n, p, T):
    C = rng.standard_normal((p, n))
    x = rng.standard_normal(n)
    y = rng.standard_normal((T - 1, p))
    return ObservedData(x=x, C=C, observations=y)


def test_criterion_01_descent_matches_ridge():
    rng = np.random.default_rng(41)
    gammas = [0.1, 1.0, 10.0]
    for k in range(20):
        n = int(rng.integers(1, 6))
        T = int(rng.integers(2, 51))
        gamma = gammas[k % 3]
        traj = random_trajectory(rng, n, T)
        start = time.perf_counter()
        A, report = gradient_descent(
            traj, gamma, HyperParams(gamma=gamma, max_iters=200_000, grad_tol=1e-9)
        )
        elapsed = time.perf_counter() - start
        assert report.converged
        assert elapsed < 1.0
        assert np.linalg.norm(A - ridge(traj, gamma)) <= 1e-8


def test_criterion_02_step_bound_is_sharp():
    rng = np.random.default_rng(43)
    increases = 0
    for k in range(20):
        n = 1 if k == 0 else int(rng.integers(1, 6))
        T = int(rng.integers(2, 51))
        gamma = [0.1, 1.0, 10.0][k % 3]
        traj = random_trajectory(rng, n, T)
        bound = step_bound(traj, gamma)

        safe = HyperParams(gamma=gamma, rho=0.99 * bound, max_iters=300, grad_tol=1e-13)
        _, report = gradient_descent(traj, gamma, safe)
        J = np.asarray(report.objectives)
        assert not report.diverged
        assert np.all(np.diff(J) <= 1e-12 * (1.0 + np.abs(J[:-1])))

        wild = HyperParams(gamma=gamma, rho=1.5 * bound, max_iters=60, grad_tol=1e-13)
        _, report = gradient_descent(traj, gamma, wild)
        if report.diverged:
            increases += 1
    assert increases >= 1


def test_criterion_03_recursive_equals_batch():
    rng = np.random.default_rng(47)
    traj = random_trajectory(rng, 3, 52)
    gamma = 2.0
    state = RidgeState.from_trajectory(Trajectory(states=traj.states[:2]), gamma)
    for k in range(2, 52):
        state = recursive_update(state, traj.states[k - 1], traj.states[k])
        batch = ridge(Trajectory(states=traj.states[: k + 1]), gamma)
        assert np.linalg.norm(state.estimate - batch) <= 1e-10
    assert state.horizon == 52


def test_criterion_04_dual_reconstruction_and_minimality():
    rng = np.random.default_rng(53)
    for _ in range(5):
        n = int(rng.integers(1, 6))
        T = int(rng.integers(3, 12))
        gamma = float(rng.choice([0.5, 1.0, 10.0]))
        traj = random_trajectory(rng, n, T)
        sol = dual_solve(traj, gamma)
        rebuilt = -sol.coefficients.T @ traj.states[:-1]
        assert np.linalg.norm(rebuilt - ridge(traj, gamma)) <= 1e-10

        # The dual payoff, restated from scratch: |q|^2/(2 gamma)
        # + 1/2 sum q_t . G q_s + sum x_{t+1} . q_t with G the state Gram.
        Z, Xp = traj.states[:-1], traj.states[1:]
        G = Z @ Z.T

        def payoff(q):
            return (
                float(np.sum(q * q)) / (2.0 * gamma)
                + 0.5 * float(np.sum(q * (G @ q)))
                + float(np.sum(Xp * q))
            )

        best = payoff(sol.coefficients)
        assert best == pytest.approx(sol.dual_value, rel=1e-12, abs=1e-12)
        for _ in range(100):
            q = sol.coefficients + rng.standard_normal(sol.coefficients.shape)
            assert best <= payoff(q) + 1e-12


def test_criterion_05_neumann_truncation_order():
    rng = np.random.default_rng(59)
    traj = random_trajectory(rng, 3, 12)
    gamma = 400.0
    for order in (0, 1, 2):
        err_lo = np.linalg.norm(ridge(traj, gamma) - neumann_expansion(traj, gamma, order))
        err_hi = np.linalg.norm(
            ridge(traj, 2 * gamma) - neumann_expansion(traj, 2 * gamma, order)
        )
        assert err_lo / err_hi >= 0.8 * 2 ** (order + 1)


def test_criterion_06_minimum_norm_limits():
    # States confined to a line: least squares is undefined, the ridge path
    # still has a limit, and both observation regimes must find it.
    A_true = np.diag([0.5, 0.3])
    traj = simulate_full(A_true, np.array([1.0, 0.0]), 6)
    limit = np.array([[0.5, 0.0], [0.0, 0.0]])

    diag = min_norm_limit(traj, [1e0, 1e2, 1e4, 1e6])
    assert np.allclose(diag.limit, limit, atol=1e-12)
    assert all(a > b for a, b in zip(diag.distances, diag.distances[1:]))
    assert diag.distances[-1] <= 1e-4

    data = ObservedData(x=traj.states[0], C=np.eye(2), observations=traj.states[1:])
    dists = []
    A0 = None
    for gamma in [1e2, 1e3, 1e4, 1e5, 1e6]:
        result = alternate(
            data,
            gamma,
            gamma,
            rho=0.0,
            opts=HyperParams(gamma=gamma, mu=gamma, max_iters=200_000, grad_tol=1e-9),
            A0=A0,
        )
        assert result.report.converged
        A0 = result.transition
        dists.append(float(np.linalg.norm(result.transition - limit)))
    assert all(a > b for a, b in zip(dists, dists[1:]))
    assert dists[-1] <= 1e-3


def test_criterion_07_adjoint_gradient_and_curvature():
    rng = np.random.default_rng(61)
    eps = 1e-5
    for _ in range(20):
        n = int(rng.integers(1, 4))
        T = int(rng.integers(3, 8))
        p = int(rng.integers(1, n + 1))
        gamma = float(rng.uniform(0.5, 5.0))
        mu = float(rng.uniform(0.5, 5.0))
        data = random_observed(rng, n, p, T)
        Z = DecisionPoint(
            A=0.5 * rng.standard_normal((n, n)), v=0.5 * rng.standard_normal((T - 1, n))
        )
        _, grad, _, _ = objective_and_gradient(Z, data, gamma, mu)

        def value(A, v):
            J, _, _, _ = objective_and_gradient(
                DecisionPoint(A=A, v=v), data, gamma, mu
            )
            return J

        fd = DecisionPoint(A=np.zeros((n, n)), v=np.zeros((T - 1, n)))
        for i in range(n):
            for j in range(n):
                E = np.zeros((n, n))
                E[i, j] = eps
                fd.A[i, j] = (value(Z.A + E, Z.v) - value(Z.A - E, Z.v)) / (2 * eps)
        for t in range(T - 1):
            for j in range(n):
                E = np.zeros((T - 1, n))
                E[t, j] = eps
                fd.v[t, j] = (value(Z.A, Z.v + E) - value(Z.A, Z.v - E)) / (2 * eps)
        assert fd.axpy(-1.0, grad).norm() / max(1.0, grad.norm()) <= 1e-6

        Zt = DecisionPoint(
            A=rng.standard_normal((n, n)), v=rng.standard_normal((T - 1, n))
        )
        form = hessian_quadratic_form(Z, Zt, data, gamma, mu)
        h = 1e-4
        second = (
            value(Z.A + h * Zt.A, Z.v + h * Zt.v)
            - 2.0 * value(Z.A, Z.v)
            + value(Z.A - h * Zt.A, Z.v - h * Zt.v)
        ) / h**2
        assert abs(second - form) / max(1.0, abs(form)) <= 1e-4


def test_criterion_08_descent_monotone_inside_ball():
    rng = np.random.default_rng(67)
    for _ in range(10):
        n = int(rng.integers(1, 4))
        T = int(rng.integers(3, 9))
        p = int(rng.integers(1, n + 1))
        gamma = float(rng.uniform(0.3, 3.0))
        mu = float(rng.uniform(0.3, 3.0))
        data = random_observed(rng, n, p, T)
        Z, report = descend_partial(
            data, gamma, mu, HyperParams(gamma=gamma, mu=mu, max_iters=300, grad_tol=1e-9)
        )
        assert not report.diverged
        assert np.all(np.diff(np.asarray(report.objectives)) <= 0.0)
        M = trust_ball(data, gamma, mu)
        assert report.iterate_norms
        assert max(report.iterate_norms) <= M + 1e-9
        assert Z.norm() <= M + 1e-9


def test_criterion_09_alternation_ledger_and_stationarity():
    rng = np.random.default_rng(71)
    for rho in (0.0, 1.0):
        for _ in range(4):
            n = int(rng.integers(1, 4))
            T = int(rng.integers(3, 8))
            p = int(rng.integers(1, n + 1))
            gamma = float(rng.uniform(0.5, 5.0))
            mu = float(rng.uniform(0.5, 5.0))
            data = random_observed(rng, n, p, T)
            result = alternate(
                data,
                gamma,
                mu,
                rho=rho,
                opts=HyperParams(gamma=gamma, mu=mu, max_iters=50_000, grad_tol=1e-9),
            )
            assert result.report.converged
            assert result.report.steps[-1] <= 1e-9
            for entry in result.ledger:
                assert abs(entry.gap) <= 1e-10
            resid = stationarity_residual(
                result.transition, result.states, result.adjoints, data, gamma, mu
            )
            assert resid <= 1e-8


def test_criterion_10_smoother_against_dense_solve():
    rng = np.random.default_rng(73)
    for _ in range(5):
        n = int(rng.integers(1, 4))
        p = int(rng.integers(1, n + 1))
        T = int(rng.integers(4, 10))
        gamma = float(rng.uniform(0.5, 5.0))
        mu = float(rng.uniform(0.5, 5.0))
        data = random_observed(rng, n, p, T)
        A = rng.standard_normal((n, n))
        A *= 0.9 / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-6)

        states, adjoints, gains = smoother_solve(A, data, gamma, mu)
        dense = dense_state_solve(A, data, gamma, mu)
        assert np.linalg.norm(states - dense) <= 1e-9
        # At the optimum p_{t+1} = -gamma (x_{t+1} - A x_t), so the dense
        # states determine the multipliers without any Riccati machinery.
        p_dense = -gamma * (dense[1:] - dense[:-1] @ A.T)
        assert np.linalg.norm(adjoints[1:] - p_dense) <= 1e-9

        CtC = data.C.T @ data.C
        for t in range(1, T + 1):
            S = gains.sigma(t)
            lhs = np.linalg.inv(np.eye(n) + mu * CtC @ S)
            inner = data.C @ S @ data.C.T + np.eye(p) / mu
            rhs = np.eye(n) - data.C.T @ np.linalg.solve(inner, data.C @ S)
            assert np.linalg.norm(lhs - rhs) <= 1e-12

        longer = ObservedData(
            x=data.x,
            C=data.C,
            observations=np.vstack([data.observations, rng.standard_normal((6, p))]),
        )
        ext = riccati_gains(A, longer, gamma, mu)
        assert np.array_equal(ext.sigmas[:T], gains.sigmas)
        assert np.array_equal(ext.drifts[:T], gains.drifts)


def test_criterion_11_realization_round_trip():
    rng = np.random.default_rng(79)
    for n in (1, 2, 3, 4):
        for _ in range(2):
            m = int(rng.integers(1, 3))
            p = int(rng.integers(1, 3))
            while True:
                A = rng.standard_normal((n, n))
                A *= 0.85 / max(np.max(np.abs(np.linalg.eigvals(A))), 1e-6)
                sys = SystemRealization(
                    A=A, B=rng.standard_normal((n, m)), C=rng.standard_normal((p, n))
                )
                O, Ctr = structure_matrices(sys, n, n)
                if np.linalg.matrix_rank(O) == n and np.linalg.matrix_rank(Ctr) == n:
                    break
            g = markov_params(sys, 2 * n + 4)
            result = silverman_order(g)
            assert result.order == n

            rebuilt = markov_params(minimal_realization(g, n), 2 * n)
            for t in range(1, 2 * n + 1):
                assert np.linalg.norm(rebuilt.block(t) - g.block(t)) <= 1e-8


def test_criterion_12_scalar_expansion_example():
    rng = np.random.default_rng(83)
    for _ in range(10):
        a = float(rng.uniform(-0.9, 0.9))
        c = float(rng.uniform(0.3, 2.0))
        gains = normalized_gains(np.array([[a]]), np.array([[c]]), 3)
        s2 = 1.0
        s3 = a * a / (c * c + 1.0) + 1.0
        assert gains.sigma(1)[0, 0] == pytest.approx(0.0, abs=1e-12)
        assert gains.sigma(2)[0, 0] == pytest.approx(s2, abs=1e-12)
        assert gains.sigma(3)[0, 0] == pytest.approx(s3, abs=1e-12)
        for t, s in ((1, 0.0), (2, s2), (3, s3)):
            assert gains.closed_loop(t)[0, 0] == pytest.approx(
                a / (c * c * s + 1.0), abs=1e-12
            )
            assert gains.injection(t)[0, 0] == pytest.approx(
                c * c / (c * c * s + 1.0), abs=1e-12
            )

        exp = first_order_correction(np.array([[a]]), np.array([[c]]), np.array([1.0]), 3)
        a1 = exp.correction[0, 0]
        lam2 = gains.injection(2)[0, 0]
        lam3 = gains.injection(3)[0, 0]
        gam2 = gains.closed_loop(2)[0, 0]
        assert a1 * (lam2 + lam3 * (gam2 + a) ** 2) + a == pytest.approx(0.0, abs=1e-10)

    diag = expansion_validation(
        np.array([[0.5]]), np.array([[1.0]]), np.array([1.0]), 3, [1e3, 1e4, 1e5]
    )
    a1 = diag.correction[0, 0]
    assert a1 == pytest.approx(-17.0 / 26.0, abs=1e-12)
    for record in diag.records[-2:]:
        assert record.converged
        assert abs(record.scaled_deviation[0, 0] - a1) <= 0.05 * abs(a1)
