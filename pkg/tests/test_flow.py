import numpy as np
import pytest

from app.core.exceptions import NonFiniteStateError, InvalidArgumentError
from app.numerics.flow import flow_map, flow_map_batch, integrate, step, step_schedule
from app.numerics.oracles import constant_forcing_fixed_point
from app.numerics.problem import sample_ball


def test_step_schedule():
    assert step_schedule(0.3, 1e-3) == (300, 0.0)
    assert step_schedule(1.0, 0.25) == (4, 0.0)
    full, tail = step_schedule(0.0105, 1e-3)
    assert full == 10
    assert tail == pytest.approx(5e-4)


def test_linear_flow_is_exact(linear_problem):
    u0 = np.array([1.5, -0.7])
    expected = u0 * np.exp(-linear_problem.eigenvalues * 0.8)
    np.testing.assert_allclose(flow_map(linear_problem, u0, 0.8, 1e-3), expected, rtol=1e-12)


def test_trailing_short_step(linear_problem):
    u0 = np.array([1.0, 1.0])
    traj = integrate(linear_problem, u0, 0.0105, 1e-3)
    assert traj.times[-1] == 0.0105
    np.testing.assert_allclose(traj.final, np.exp(-linear_problem.eigenvalues * 0.0105), rtol=1e-12)


def test_zero_time_is_identity(ci_problem):
    u0 = np.linspace(0.0, 0.01, ci_problem.dim)
    np.testing.assert_array_equal(flow_map(ci_problem, u0, 0.0, 1e-3), u0)


def test_semigroup_composition(ci_problem):
    u0 = np.zeros(ci_problem.dim)
    u0[:3] = [0.2, -0.1, 0.05]
    h = 1e-3
    composed = flow_map(ci_problem, flow_map(ci_problem, u0, 0.5, h), 0.3, h)
    np.testing.assert_array_equal(composed, flow_map(ci_problem, u0, 0.8, h))


def test_forcing_fixed_point_is_stationary(forcing_problem):
    rest = constant_forcing_fixed_point(forcing_problem)
    np.testing.assert_allclose(flow_map(forcing_problem, rest, 2.0, 1e-3), rest, atol=1e-14)


def test_forcing_flow_matches_closed_form(forcing_problem):
    lam = forcing_problem.eigenvalues
    c = np.asarray(forcing_problem.nonlinearity.forcing)
    u0 = np.full(forcing_problem.dim, 0.1)
    decay = np.exp(-lam)
    expected = decay * u0 + (1.0 - decay) * c / lam
    np.testing.assert_allclose(flow_map(forcing_problem, u0, 1.0, 1e-3), expected, rtol=1e-10)


def test_integrate_keeps_endpoints(linear_problem):
    traj = integrate(linear_problem, np.ones(2), 1.0, 0.01, keep_every=30)
    np.testing.assert_allclose(traj.times, [0.0, 0.3, 0.6, 0.9, 1.0])
    assert traj.states.shape == (5, 2)
    assert traj.index_of(0.6) == 2
    with pytest.raises(InvalidArgumentError):
        traj.index_of(0.45)


def test_batched_integration_matches_rows(ci_problem):
    rng = np.random.default_rng(3)
    states = sample_ball(rng, 4, ci_problem.dim, ci_problem.r_trunc)
    rows = np.array([flow_map(ci_problem, u, 0.2, 1e-3) for u in states])
    np.testing.assert_allclose(flow_map_batch(ci_problem, states, 0.2, 1e-3), rows, rtol=1e-13, atol=1e-16)
    traj = integrate(ci_problem, states, 0.2, 1e-3)
    assert traj.states.shape == (201, 4, ci_problem.dim)


def test_chafee_infante_is_dissipative(ci_problem):
    rng = np.random.default_rng(4)
    states = sample_ball(rng, 8, ci_problem.dim, ci_problem.r_trunc)
    later = flow_map_batch(ci_problem, states, 3.0, 1e-3)
    assert np.all(np.linalg.norm(later, axis=1) < np.linalg.norm(states, axis=1))


def test_non_finite_state_raises(linear_problem):
    with pytest.raises(NonFiniteStateError):
        step(linear_problem, np.array([np.nan, 0.0]), 1e-3)
    with pytest.raises(InvalidArgumentError):
        step(linear_problem, np.zeros(2), 0.0)


def test_step_halving_converges_at_first_order(ci_problem):
    u0 = np.zeros(ci_problem.dim)
    u0[:4] = [0.3, -0.2, 0.1, 0.05]
    coarse, mid, fine = (flow_map(ci_problem, u0, 1.0, h) for h in (1e-2, 5e-3, 2.5e-3))
    ratio = np.linalg.norm(coarse - mid) / np.linalg.norm(mid - fine)
    assert 1.7 <= ratio <= 2.3


def test_zero_nonlinearity_flow_is_linear(zero_problem):
    rng = np.random.default_rng(5)
    u, v = rng.standard_normal((2, zero_problem.dim))
    np.testing.assert_allclose(flow_map(zero_problem, u + v, 0.7, 1e-3),
                               flow_map(zero_problem, u, 0.7, 1e-3) + flow_map(zero_problem, v, 0.7, 1e-3),
                               atol=1e-12)
