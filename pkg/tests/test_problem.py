import math

import numpy as np
import pydantic
import pytest

from app.core.exceptions import DimensionMismatchError, InvalidProblemError, PresetNotFoundException
from app.models import NonlinearitySpec, ProblemPreset
from app.numerics.problem import (
    SpectralProblem, build_problem, collocation_size, cutoff, estimate_constants, eval_nonlinearity,
    join, raw_nonlinearity, sample_ball, split, to_modes, to_physical, truncation_radius
)


def test_cutoff_profile():
    assert cutoff(0.3, 0.5) == 1.0
    assert cutoff(1.0, 0.5) == 0.0
    assert cutoff(1.7, 0.5) == 0.0
    assert cutoff(0.75, 0.5) == pytest.approx(0.5)


def test_zero_preset(zero_problem):
    assert zero_problem.k0 == 0.0
    assert zero_problem.k1 == 0.0
    assert zero_problem.r_trunc == 2.0
    np.testing.assert_array_equal(zero_problem.eigenvalues, [1, 4, 9, 16, 25, 36])
    assert zero_problem.lambda_n1 == 9.0


def test_constant_forcing_constants_are_analytic(forcing_problem):
    c = np.array([0.0, 0.8, 0.3, 0.0, 0.2, 0.1])
    assert forcing_problem.r_trunc == 4.0
    assert forcing_problem.k0 == pytest.approx(np.linalg.norm(c))
    assert forcing_problem.k1 == pytest.approx(np.linalg.norm(c) * 1.5 / (0.5 * 4.0))


def test_decoupled_radius_keeps_outer_cutoff_inactive(presets):
    preset = presets.get("decoupled")
    eigenvalues = np.array([1.0, 4.0, 9.0, 16.0])
    assert truncation_radius(preset, eigenvalues) == pytest.approx(4.5)


def test_ci_preset_pins_k1(ci_problem):
    assert ci_problem.k1 == 2.0
    assert ci_problem.r_trunc == pytest.approx(0.8)
    assert 0.0 < ci_problem.k0 < ci_problem.r_trunc * ci_problem.lambda1
    assert ci_problem.lambda_n1 == 9.0
    assert "no_classical_spectral_gap" not in ci_problem.flags


def test_unknown_preset(presets):
    with pytest.raises(PresetNotFoundException) as exc:
        presets.get("nope")
    assert "zero" in exc.value.details["available"]


def test_preset_layout_validation():
    with pytest.raises(pydantic.ValidationError):
        ProblemPreset(name="bad", modes=4, split=4, nonlinearity=NonlinearitySpec(kind="zero"))
    with pytest.raises(pydantic.ValidationError):
        NonlinearitySpec(kind="chafee_infante")


def test_problem_validation():
    spec = NonlinearitySpec(kind="zero")
    with pytest.raises(InvalidProblemError):
        SpectralProblem(eigenvalues=np.array([4.0, 1.0]), split_index=1, nonlinearity=spec,
                        k0=0.0, k1=0.0, r_trunc=1.0)
    with pytest.raises(InvalidProblemError):
        SpectralProblem(eigenvalues=np.array([1.0, 4.0]), split_index=1, nonlinearity=spec,
                        k0=0.0, k1=4.0, r_trunc=1.0)
    with pytest.raises(InvalidProblemError):
        SpectralProblem(eigenvalues=np.array([1.0, 4.0]), split_index=1, nonlinearity=spec,
                        k0=3.0, k1=0.0, r_trunc=1.0)


def test_repeated_lambda1_is_flagged():
    problem = SpectralProblem(eigenvalues=np.array([1.0, 1.0, 4.0]), split_index=2,
                              nonlinearity=NonlinearitySpec(kind="zero"), k0=0.0, k1=0.0, r_trunc=1.0)
    assert "lambda1_repeated" in problem.flags


def test_split_and_join(zero_problem):
    u = np.arange(1.0, 7.0)
    p, q = split(zero_problem, u)
    np.testing.assert_array_equal(p + q, u)
    np.testing.assert_array_equal(p[2:], 0.0)
    np.testing.assert_array_equal(join(zero_problem, u[:2], u[2:]), u)
    with pytest.raises(DimensionMismatchError):
        join(zero_problem, u[:3], u[3:])


def test_sine_transform_inverts_on_modes():
    rng = np.random.default_rng(0)
    coeffs = rng.standard_normal((3, 8))
    n_points = collocation_size(8) - 1
    np.testing.assert_allclose(to_modes(to_physical(coeffs, n_points), 8), coeffs, atol=1e-13)


def test_chafee_infante_single_mode_is_alias_free(ci_problem):
    a = 0.1
    u = np.zeros(ci_problem.dim)
    u[0] = a
    expected = np.zeros(ci_problem.dim)
    expected[0] = a - 3.0 * a ** 3 / (2.0 * math.pi)
    expected[2] = a ** 3 / (2.0 * math.pi)
    np.testing.assert_allclose(raw_nonlinearity(ci_problem, u), expected, atol=1e-14)


def test_nonlinearity_vanishes_outside_truncation(ci_problem, forcing_problem):
    for problem in (ci_problem, forcing_problem):
        u = np.zeros(problem.dim)
        u[1] = problem.r_trunc * 1.01
        np.testing.assert_array_equal(eval_nonlinearity(problem, u), 0.0)


def test_forcing_is_constant_inside_inner_radius(forcing_problem):
    u = np.full(forcing_problem.dim, 0.1)
    np.testing.assert_array_equal(eval_nonlinearity(forcing_problem, u), forcing_problem.nonlinearity.forcing)


def test_batch_matches_rows(ci_problem):
    rng = np.random.default_rng(1)
    batch = sample_ball(rng, 5, ci_problem.dim, ci_problem.r_trunc)
    rows = np.array([eval_nonlinearity(ci_problem, u) for u in batch])
    np.testing.assert_allclose(eval_nonlinearity(ci_problem, batch), rows, rtol=1e-13, atol=1e-15)


def test_sample_ball_stays_inside():
    rng = np.random.default_rng(2)
    for radial in ("volume", "uniform"):
        points = sample_ball(rng, 200, 5, 3.0, radial=radial)
        assert np.all(np.linalg.norm(points, axis=1) <= 3.0 + 1e-12)


def test_estimate_constants_reproducible(small_ci_preset):
    problem = build_problem(small_ci_preset)
    assert estimate_constants(problem, 300, seed=5) == estimate_constants(problem, 300, seed=5)
    k0, k1 = estimate_constants(problem, 300, seed=5)
    assert k0 > 0.0 and k1 > 0.0


def test_far_rows_do_not_poison_a_mixed_batch(ci_problem):
    near = np.zeros(ci_problem.dim)
    near[0] = 0.1
    far = np.zeros(ci_problem.dim)
    far[0] = 1e120
    with np.errstate(over="raise", invalid="raise"):
        values = eval_nonlinearity(ci_problem, np.stack([near, far]))
    assert np.all(np.isfinite(values))
    np.testing.assert_array_equal(values[1], 0.0)
    np.testing.assert_allclose(values[0], eval_nonlinearity(ci_problem, near), rtol=1e-13, atol=1e-15)


def test_nonlinearity_stays_below_k0(ci_problem):
    rng = np.random.default_rng(21)
    u = sample_ball(rng, 1000, ci_problem.dim, ci_problem.r_trunc)
    sizes = np.linalg.norm(eval_nonlinearity(ci_problem, u), axis=1)
    assert sizes.max() <= ci_problem.k0 + 1e-12


def test_sampled_k1_bounds_random_pairs(ci_problem):
    _, k1_est = estimate_constants(ci_problem, 2000, seed=0)
    assert k1_est <= ci_problem.k1
    rng = np.random.default_rng(22)
    u = sample_ball(rng, 1000, ci_problem.dim, ci_problem.r_trunc)
    v = sample_ball(rng, 1000, ci_problem.dim, ci_problem.r_trunc)
    quotients = (np.linalg.norm(eval_nonlinearity(ci_problem, u) - eval_nonlinearity(ci_problem, v), axis=1)
                 / np.linalg.norm(u - v, axis=1))
    assert quotients.max() <= k1_est
