import numpy as np
import pytest

from linsysid import (
    HyperParams,
    ObservedData,
    Trajectory,
    simulate_full,
    simulate_observed,
)


def test_scalar_simulation():
    traj = simulate_full([[0.5]], [1.0], 3)
    assert traj.T == 3 and traj.n == 1
    assert np.allclose(traj.states[:, 0], [1.0, 0.5, 0.25])
    assert traj.state(1) == pytest.approx(1.0)
    assert traj.state(3) == pytest.approx(0.25)


def test_simulation_matches_matrix_powers():
    rng = np.random.default_rng(7)
    for _ in range(20):
        n = rng.integers(1, 5)
        A = rng.standard_normal((n, n))
        x = rng.standard_normal(n)
        T = int(rng.integers(2, 9))
        traj = simulate_full(A, x, T)
        for t in range(1, T + 1):
            assert np.allclose(traj.state(t), np.linalg.matrix_power(A, t - 1) @ x)


def test_scalar_observed():
    data = simulate_observed([[0.5]], [[2.0]], [1.0], 3)
    assert data.T == 3 and data.n == 1 and data.p == 1
    assert data.obs(2) == pytest.approx(1.0)
    assert data.obs(3) == pytest.approx(0.5)


def test_observations_are_output_of_full_simulation():
    rng = np.random.default_rng(11)
    A = rng.standard_normal((3, 3)) * 0.4
    C = rng.standard_normal((2, 3))
    x = rng.standard_normal(3)
    traj = simulate_full(A, x, 6)
    data = simulate_observed(A, C, x, 6)
    for t in range(2, 7):
        assert np.allclose(data.obs(t), C @ traj.state(t))


def test_states_are_read_only():
    traj = simulate_full([[0.5]], [1.0], 3)
    with pytest.raises(ValueError):
        traj.states[0, 0] = 2.0


def test_time_index_bounds():
    traj = simulate_full([[0.5]], [1.0], 3)
    with pytest.raises(IndexError):
        traj.state(0)
    with pytest.raises(IndexError):
        traj.state(4)
    data = simulate_observed([[0.5]], [[1.0]], [1.0], 3)
    with pytest.raises(IndexError):
        data.obs(1)
    with pytest.raises(IndexError):
        data.obs(4)


def test_validation_errors_name_the_problem():
    with pytest.raises(ValueError, match="T must be at least 2"):
        simulate_full([[0.5]], [1.0], 1)
    with pytest.raises(ValueError, match="square"):
        simulate_full([[1.0, 2.0]], [1.0], 3)
    with pytest.raises(ValueError, match="length 2"):
        simulate_full(np.eye(2), [1.0], 3)
    with pytest.raises(ValueError, match="non-finite"):
        Trajectory(np.array([[1.0], [np.nan]]))
    with pytest.raises(ValueError, match="at least two states"):
        Trajectory(np.ones((1, 3)))
    with pytest.raises(ValueError, match="columns"):
        simulate_observed(np.eye(2), np.ones((1, 3)), [1.0, 0.0], 3)
    with pytest.raises(ValueError, match="does not match C"):
        ObservedData(x=[1.0], C=[[1.0]], observations=np.ones((2, 2)))


def test_hyperparams_validation():
    opts = HyperParams(gamma=2.0, mu=0.5, rho=0.0, max_iters=10, grad_tol=1e-6)
    assert opts.gamma == 2.0
    for bad in (
        dict(gamma=0.0),
        dict(gamma=-1.0),
        dict(mu=0.0),
        dict(rho=-0.1),
        dict(max_iters=0),
        dict(grad_tol=0.0),
    ):
        with pytest.raises(ValueError):
            HyperParams(**bad)
