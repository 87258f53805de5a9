import numpy as np
import pytest

from app.core.exceptions import DimensionMismatchError, InvalidArgumentError
from app.models import GridMeta
from app.numerics.backward import (
    ShootingResult, _BranchTracker, ball_radius, check_backward_bounds, linear_preimage, phi, phi_graph, shoot,
    shoot_batch, shooting_map
)
from app.numerics.oracles import constant_forcing_q, decoupled_phi


def test_zero_problem_shoots_to_linear_preimage(zero_problem):
    p0 = np.array([0.5, -0.3])
    result = shoot(zero_problem, p0, 2, h=1e-3)
    assert result.converged
    assert result.in_ball
    np.testing.assert_allclose(result.p_minus_n, linear_preimage(zero_problem, p0, 2), rtol=1e-9)
    np.testing.assert_array_equal(result.q0, 0.0)
    np.testing.assert_allclose(shooting_map(zero_problem, result.p_minus_n, 2, 1e-3), p0, atol=1e-10)


def test_constant_forcing_q_at_origin(forcing_problem):
    result = shoot(forcing_problem, np.zeros(1), 6, h=1e-3)
    assert result.converged
    np.testing.assert_allclose(result.q0, constant_forcing_q(forcing_problem), atol=1e-9)


def test_trajectory_runs_over_negative_times(forcing_problem):
    result = shoot(forcing_problem, np.array([0.2]), 2, h=1e-3)
    traj = result.trajectory
    assert traj.times[0] == pytest.approx(-2.0)
    assert traj.times[-1] == pytest.approx(0.0)
    np.testing.assert_allclose(traj.final, result.endpoint)


def test_stray_guess_is_projected(zero_problem):
    p0 = np.array([0.1, 0.1])
    far = np.array([[1e12, -1e12]])
    result = shoot_batch(zero_problem, p0[None], 1, far, h=1e-3, with_trajectory=False)[0]
    assert result.converged
    assert np.linalg.norm(result.p_minus_n) <= ball_radius(zero_problem, 1, np.linalg.norm(p0))


def test_shooting_input_validation(zero_problem):
    with pytest.raises(InvalidArgumentError):
        shoot_batch(zero_problem, np.zeros((1, 2)), 0)
    with pytest.raises(DimensionMismatchError):
        shoot_batch(zero_problem, np.zeros((1, 3)), 1)


def test_backward_bounds_hold_on_chafee_infante(ci_problem):
    result = shoot(ci_problem, np.array([0.1, -0.05]), 3, h=1e-3)
    assert result.converged
    report = check_backward_bounds(ci_problem, result)
    names = {c.name for c in report.checks}
    assert {"p_growth", "q_bound", "q_half_power", "ball_containment", "residual"} <= names
    assert "q_equicontinuity_100h" in names
    assert report.passed
    assert report.half_power_ratio is not None and report.half_power_ratio > 0.0


def test_phi_constant_forcing_single_branch(forcing_problem):
    value = phi(forcing_problem, np.zeros(1), n_max=6, n_starts=3, seed=0, h=1e-3, tol=1e-8)
    assert not value.partial
    assert not value.multi_valued
    np.testing.assert_allclose(value.values[0], constant_forcing_q(forcing_problem), atol=1e-8)
    branch = value.branches[0]
    assert branch.settled
    assert all(b < a for a, b in zip(branch.increments, branch.increments[1:]))


def test_phi_matches_decoupled_oracle(decoupled_problem):
    p0 = np.array([0.5])
    value = phi(decoupled_problem, p0, n_max=4, n_starts=2, seed=0, h=1e-3, tol=1e-8)
    expected = decoupled_phi(decoupled_problem, p0)
    assert value.branches
    gaps = np.linalg.norm(value.values - expected, axis=1)
    assert gaps.min() <= 1e-2


def test_phi_graph_does_not_depend_on_chunking(forcing_problem):
    nodes = np.linspace(-0.4, 0.4, 5)[:, None]
    meta = GridMeta(bounds=[(-0.4, 0.4)], resolution=[5], h=1e-3)
    args = dict(n_max=3, n_starts=2, seed=7, h=1e-3, tol=1e-8)
    small, _ = phi_graph(forcing_problem, nodes, meta, chunk_size=2, **args)
    whole, values = phi_graph(forcing_problem, nodes, meta, chunk_size=16, **args)
    np.testing.assert_allclose(small.q_points, whole.q_points, rtol=1e-12, atol=1e-15)
    np.testing.assert_array_equal(small.node_index, whole.node_index)
    assert whole.label == "graph_Phi"
    assert len(values) == 5


def _landing(q: float) -> ShootingResult:
    return ShootingResult(
        horizon_n=1, p0_target=np.zeros(1), p_minus_n=np.zeros(1), residual=0.0,
        endpoint=np.array([0.0, q]), converged=True, tol=1e-10, in_ball=True,
    )


def test_settled_branch_is_not_duplicated_by_later_starts():
    tracker = _BranchTracker(np.zeros(1), np.zeros((2, 1)))
    tracker.update(1, [_landing(0.0), _landing(1.0)], [None, None], cluster_tol=1e-6, tol=1e-8)
    assert [b.branch_id for b in tracker.branches] == [0, 1]

    tracker.update(2, [_landing(0.0), _landing(0.9), _landing(0.0), _landing(0.9)],
                   [0, 1, None, None], cluster_tol=1e-6, tol=1e-8)
    settled = {b.branch_id: b.settled for b in tracker.branches}
    assert settled == {0: True, 1: False}

    # a multistart falls back onto the settled branch while branch 1 keeps moving
    tracker.update(3, [_landing(0.85), _landing(0.0), _landing(0.85)],
                   [1, None, None], cluster_tol=1e-6, tol=1e-8)
    assert [b.branch_id for b in tracker.branches] == [0, 1]
    assert tracker.branches[0].horizon == 2
    assert tracker.branches[1].q0[0] == pytest.approx(0.85)


def test_shooting_map_golden(ci_problem, golden):
    p_init = np.array([[0.3, -0.2], [0.05, 0.4], [-0.6, 0.1]])
    golden("shooting_map_ci_n1", shooting_map(ci_problem, p_init, 1, 1e-3).tolist())


def test_backward_sequence_at_origin_golden(ci_problem, golden):
    rows = []
    for n in range(1, 5):
        result = shoot(ci_problem, np.zeros(2), n, h=1e-3, tol=1e-10)
        assert result.residual <= 1e-8
        rows.append({"n": n, "p_minus_n": result.p_minus_n.tolist(), "q0": result.q0.tolist()})
    golden("shoot_origin_ci", rows, atol=1e-9)
