import numpy as np
import pytest

from app.core.exceptions import DimensionMismatchError, EmptyPointSetError, InvalidArgumentError
from app.models import RateConstants
from app.numerics.metrics import (
    LOG_FLOOR, build_rate_report, cauchy_rate, directed_hausdorff, hausdorff, nearest_distances, theoretical_bound
)


def _constants(rate: float = 2.0, k0: float = 1.0) -> RateConstants:
    return RateConstants(
        lambda1=1.0, lambdaN=1.0, lambdaN1=4.0, k0=k0, k1=0.0, alpha=0.0, beta=3.0, k2=2.0,
        k3=0.0, k4=0.0, k5=0.0, rate=rate, gap_delta=3.0, rate_positive=rate > 0,
        k3_denominator_valid=True, spectral_gap_condition=True,
    )


def test_hausdorff_of_shifted_segments():
    x = np.linspace(0.0, 1.0, 11)[:, None]
    y = x + 0.25
    assert hausdorff(x, y) == pytest.approx(0.25, abs=1e-13)
    assert directed_hausdorff(x, x) == 0.0


def test_directed_distance_is_asymmetric():
    a = np.array([[0.0, 0.0]])
    b = np.array([[0.0, 0.0], [3.0, 4.0]])
    assert directed_hausdorff(a, b) == 0.0
    assert directed_hausdorff(b, a) == pytest.approx(5.0)


def test_nearest_distances_chunking_is_transparent():
    rng = np.random.default_rng(0)
    x = rng.standard_normal((5000, 3))
    y = rng.standard_normal((40, 3))
    brute = np.sqrt(((x[:, None, :] - y[None]) ** 2).sum(-1)).min(axis=1)
    np.testing.assert_allclose(nearest_distances(x, y), brute, rtol=1e-12)


def test_point_set_errors():
    with pytest.raises(EmptyPointSetError):
        hausdorff(np.zeros((0, 2)), np.zeros((3, 2)))
    with pytest.raises(DimensionMismatchError):
        hausdorff(np.zeros((2, 2)), np.zeros((3, 3)))


def test_exact_geometric_sequence_recovers_rate():
    constants = _constants(rate=2.0)
    distances = [0.1 * np.exp(-2.0 * n) for n in range(1, 7)]
    report = build_rate_report(distances, constants, tol=1e-10)
    assert report.fitted_rate == pytest.approx(2.0, rel=1e-9)
    assert report.rate_within_band is True
    assert report.bound_violations == []
    assert report.nonincreasing
    assert report.n_star is None
    assert not report.converged


def test_bound_violation_and_convergence_index():
    constants = _constants(rate=2.0, k0=1.0)
    bound_at_1 = theoretical_bound(constants, 1, slack=3.0)
    report = build_rate_report([2.0 * bound_at_1, 1e-3, 1e-12], constants, tol=1e-10)
    assert report.bound_violations == [1]
    assert report.n_star == 3
    assert report.converged
    assert report.fitted_rate is not None


def test_zero_distances_are_floored_not_fitted():
    report = build_rate_report([0.0, 0.0, 0.0], _constants(), tol=1e-10, noise_floor=1e-13)
    assert report.floored_indices == [1, 2, 3]
    assert report.fitted_rate is None
    assert report.rate_within_band is None
    assert report.noise_floor == 1e-13
    assert report.converged
    assert report.n_star == 1


def test_rate_report_rejects_bad_input():
    with pytest.raises(InvalidArgumentError):
        build_rate_report([], _constants(), tol=1e-10)
    with pytest.raises(InvalidArgumentError):
        build_rate_report([0.1, -1.0], _constants(), tol=1e-10)


def test_cauchy_rate_on_contracting_sections():
    base = np.linspace(-1.0, 1.0, 9)[:, None]
    sections = [base * (1.0 - np.exp(-3.0 * n)) * 0.01 for n in range(1, 7)]
    report = cauchy_rate(sections, _constants(rate=2.0), tol=1e-10)
    assert report.indices == [1, 2, 3, 4, 5]
    assert report.fitted_rate == pytest.approx(3.0, rel=1e-6)
    assert report.pair_violations == []
    assert report.bound_violations == []


def test_cauchy_rate_needs_four_sections():
    with pytest.raises(InvalidArgumentError):
        cauchy_rate([np.zeros((3, 1))] * 3, _constants(), tol=1e-10)


def test_zero_distance_is_logged_at_the_floor():
    report = build_rate_report([1e-3, 1e-9, 0.0], _constants(rate=6.0), tol=1e-10)
    assert report.floored_indices == [3]
    assert report.fit_indices == [1, 2, 3]
    slope = np.polyfit([1.0, 2.0, 3.0], np.log([1e-3, 1e-9, LOG_FLOOR]), 1)[0]
    assert report.fitted_rate == pytest.approx(-slope)


def test_two_points_above_the_floor_are_enough_to_fit():
    distances = [3e-7, 1e-10, 5e-14, 2e-15, 1e-15]
    report = build_rate_report(distances, _constants(rate=6.5), tol=1e-10, noise_floor=1e-13)
    assert report.fit_indices == [1, 2]
    assert report.fitted_rate == pytest.approx(np.log(3e-7 / 1e-10))
    assert report.bound_violations == []
    assert report.nonincreasing


def _hausdorff_by_hand(x, y):
    forward = max(min(float(np.linalg.norm(a - b)) for b in y) for a in x)
    backward = max(min(float(np.linalg.norm(a - b)) for a in x) for b in y)
    return max(forward, backward)


def test_hausdorff_matches_exhaustive_search():
    rng = np.random.default_rng(9)
    for _ in range(100):
        dim = int(rng.integers(1, 9))
        x = rng.standard_normal((int(rng.integers(1, 51)), dim))
        y = rng.standard_normal((int(rng.integers(1, 51)), dim))
        assert hausdorff(x, y) == pytest.approx(_hausdorff_by_hand(x, y), rel=1e-12, abs=1e-15)


def test_hausdorff_is_a_metric_on_samples():
    rng = np.random.default_rng(10)
    for _ in range(50):
        x, y, z = (rng.standard_normal((int(rng.integers(1, 30)), 3)) for _ in range(3))
        assert hausdorff(x, x) == 0.0
        assert hausdorff(x, y) == pytest.approx(hausdorff(y, x), rel=1e-14)
        assert hausdorff(x, z) <= hausdorff(x, y) + hausdorff(y, z) + 1e-12
