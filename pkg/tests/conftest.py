import json
import math
from pathlib import Path

import numpy as np
import pytest

from app.models import NonlinearitySpec, ProblemPreset
from app.numerics.problem import SpectralProblem, build_problem
from app.repositories.preset_repository import PresetRepository

GOLDEN_DIR = Path(__file__).parent / "golden"


def pytest_addoption(parser):
    parser.addoption("--update-golden", action="store_true", default=False,
                     help="rewrite the reference values under tests/golden")


def _assert_matches(actual, expected, rtol, atol, where="$"):
    if isinstance(expected, dict):
        assert isinstance(actual, dict) and sorted(actual) == sorted(expected), where
        for key in expected:
            _assert_matches(actual[key], expected[key], rtol, atol, f"{where}.{key}")
    elif isinstance(expected, list):
        assert isinstance(actual, list) and len(actual) == len(expected), where
        for k, (a, e) in enumerate(zip(actual, expected)):
            _assert_matches(a, e, rtol, atol, f"{where}[{k}]")
    elif isinstance(expected, float) and not isinstance(actual, bool):
        assert math.isclose(actual, expected, rel_tol=rtol, abs_tol=atol), f"{where}: {actual} != {expected}"
    else:
        assert actual == expected, f"{where}: {actual!r} != {expected!r}"


@pytest.fixture
def golden(request):
    """Compare JSON-able values with tests/golden/<name>.json.

    A missing file is recorded from the current run; ``--update-golden``
    rewrites all of them.
    """
    update = request.config.getoption("--update-golden")

    def check(name, values, rtol=1e-9, atol=1e-13):
        path = GOLDEN_DIR / f"{name}.json"
        values = json.loads(json.dumps(values))
        if update or not path.exists():
            GOLDEN_DIR.mkdir(exist_ok=True)
            path.write_text(json.dumps(values, indent=2, sort_keys=True) + "\n")
            return
        _assert_matches(values, json.loads(path.read_text()), rtol, atol)

    return check


@pytest.fixture(scope="session")
def presets():
    return PresetRepository()


@pytest.fixture(scope="session")
def zero_problem(presets):
    return build_problem(presets.get("zero"))


@pytest.fixture(scope="session")
def forcing_problem(presets):
    return build_problem(presets.get("constant_forcing"))


@pytest.fixture(scope="session")
def decoupled_problem(presets):
    return build_problem(presets.get("decoupled"))


@pytest.fixture(scope="session")
def ci_problem(presets):
    return build_problem(presets.get("ci-16-2"))


@pytest.fixture
def linear_problem():
    """Two modes, no nonlinearity, hand-picked constants."""
    return SpectralProblem(
        eigenvalues=np.array([1.0, 4.0]),
        split_index=1,
        nonlinearity=NonlinearitySpec(kind="zero"),
        k0=0.0,
        k1=0.0,
        r_trunc=2.0,
        name="linear",
    )


@pytest.fixture
def small_ci_preset():
    return ProblemPreset(
        name="ci-small",
        modes=6,
        split=2,
        attractor_radius=0.4,
        k1=2.0,
        nonlinearity=NonlinearitySpec(kind="chafee_infante", nu=1.0),
    )
