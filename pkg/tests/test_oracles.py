import numpy as np
import pytest

from app.core.exceptions import InvalidProblemError
from app.numerics.oracles import (
    chafee_infante_stationary_states, constant_forcing_fixed_point, constant_forcing_q, decoupled_phi
)
from app.numerics.problem import eval_nonlinearity


def test_forcing_fixed_point(forcing_problem):
    c = np.asarray(forcing_problem.nonlinearity.forcing)
    np.testing.assert_allclose(constant_forcing_fixed_point(forcing_problem), c / forcing_problem.eigenvalues)
    np.testing.assert_allclose(constant_forcing_q(forcing_problem), (c / forcing_problem.eigenvalues)[1:])


def test_oracles_check_problem_kind(zero_problem):
    with pytest.raises(InvalidProblemError):
        constant_forcing_fixed_point(zero_problem)
    with pytest.raises(InvalidProblemError):
        decoupled_phi(zero_problem, np.zeros(2))


def test_decoupled_phi_support(decoupled_problem):
    np.testing.assert_array_equal(decoupled_phi(decoupled_problem, np.zeros(1)), 0.0)
    np.testing.assert_array_equal(decoupled_phi(decoupled_problem, np.array([1.2])), 0.0)
    inside = decoupled_phi(decoupled_problem, np.array([0.5]))
    assert inside[0] > 0.0
    np.testing.assert_array_equal(inside[1:], 0.0)


def test_decoupled_phi_is_even_for_quadratic_coupling(decoupled_problem):
    np.testing.assert_allclose(decoupled_phi(decoupled_problem, np.array([0.3])),
                               decoupled_phi(decoupled_problem, np.array([-0.3])), rtol=1e-12)


def test_decoupled_phi_small_p_limit(decoupled_problem):
    # inside the inner coupling radius for all relevant times: q = gamma p^2 / (lambda_Q - 2 lambda_P)
    p0 = 1e-4
    expected = 0.5 * p0 ** 2 / (decoupled_problem.lambda_n1 - 2.0 * decoupled_problem.lambda1)
    value = decoupled_phi(decoupled_problem, np.array([p0]), epsabs=1e-20)[0]
    assert value == pytest.approx(expected, rel=1e-5)


def test_chafee_infante_rest_state(ci_problem):
    states = chafee_infante_stationary_states(ci_problem, n_guesses=6, seed=0)
    assert states.shape[1] == ci_problem.dim
    assert np.min(np.linalg.norm(states, axis=1)) < 1e-10
    for u in states:
        residual = -ci_problem.eigenvalues * u + eval_nonlinearity(ci_problem, u)
        assert np.linalg.norm(residual) <= 1e-10
