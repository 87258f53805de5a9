import numpy as np
import pydantic
import pytest

from app.core.exceptions import InvalidProblemError, NotFoundError, PresetNotFoundException
from app.infrastructure.cache import ComputationCache
from app.models import ExperimentConfig, NumericsConfig
from app.numerics.backward import shoot
from app.numerics.forward import flat_manifold_for
from app.repositories.artifact_repository import ArtifactRepository, manifold_header
from app.services.forward_service import ForwardService
from app.services.experiment_service import ExperimentService
from app.services.preset_service import PresetService


def _rates_config(**numerics):
    base = dict(h=1e-2, n_max=3, grid_resolution=5)
    base.update(numerics)
    return ExperimentConfig(kind="rates", preset="zero", seed=0, numerics=base)


def test_preset_overrides_are_revalidated():
    service = PresetService()
    preset = service.get_preset("zero", {"modes": 8})
    assert preset.modes == 8
    assert service.get_preset("zero").modes == 6
    with pytest.raises(pydantic.ValidationError):
        service.get_preset("zero", {"split": 6})
    with pytest.raises(InvalidProblemError):
        service.load_problem("zero", {"k1": 100.0})


def test_unknown_preset():
    with pytest.raises(PresetNotFoundException):
        PresetService().describe("no-such-preset")


def test_describe_chafee_infante():
    service = PresetService()
    info = service.describe("ci-16-2")
    assert info["modes"] == 16 and info["split"] == 2
    assert info["constants"]["k1"] == pytest.approx(2.0)
    assert info["constants"]["alpha"] == pytest.approx(0.47214, abs=1e-5)
    text = PresetService.format_description(info)
    assert "alpha, beta" in text
    assert info["problem_hash"] in text


def test_manifold_artifacts_reload(tmp_path, forcing_problem):
    repo = ArtifactRepository(tmp_path)
    manifold = flat_manifold_for(forcing_problem, 5, h=1e-3, problem_hash="abc")
    assert repo.save_manifold("M_0", manifold) == ["M_0.csv", "M_0.json"]
    header = (tmp_path / "M_0.csv").read_text().splitlines()[0]
    assert header == ",".join(manifold_header(1, 5, False))

    loaded = repo.load_manifold("M_0")
    np.testing.assert_array_equal(loaded.points, manifold.points)
    assert loaded.problem_hash == "abc"
    assert loaded.grid_meta == manifold.grid_meta
    assert repo.list_artifacts() == ["M_0.csv", "M_0.json"]
    with pytest.raises(NotFoundError):
        repo.load_manifold("M_1")


def test_nonincreasing_check_is_required_for_positive_rates(zero_problem):
    service = ForwardService()
    result = service.run(zero_problem, "zero", NumericsConfig(h=1e-2, n_max=3, grid_resolution=5))
    report = result.report.model_copy(update={"nonincreasing": False})

    def nonincreasing_check(rate_positive):
        constants = result.constants.model_copy(update={"rate_positive": rate_positive})
        checks = service._checks(zero_problem, result.sequence, report, constants, result.lipschitz, 1e-2)
        return next(c for c in checks if c.name == "cauchy_nonincreasing")

    check = nonincreasing_check(True)
    assert check.required and not check.passed
    assert not nonincreasing_check(False).required


def test_backward_trajectory_reloads(tmp_path, forcing_problem):
    trajectory = shoot(forcing_problem, [0.2], 2).trajectory
    repo = ArtifactRepository(tmp_path)
    repo.save_trajectory("backward_trajectory_0", trajectory)
    loaded = repo.load_trajectory("backward_trajectory_0")
    assert loaded.times[0] == pytest.approx(-2.0)
    assert loaded.step == pytest.approx(trajectory.step)
    np.testing.assert_allclose(loaded.states, trajectory.states, rtol=1e-15, atol=0.0)


def test_rates_run_writes_report(tmp_path):
    service = ExperimentService()
    report = service.run(_rates_config(), output_dir=str(tmp_path), jobs=1)
    assert report.passed
    assert {"rate_bound", "lipschitz_bounded"} <= {c.name for c in report.checks}
    for name in ("report.json", "metadata.json", "summary.txt", "M_1.csv", "M_inf.csv"):
        assert (tmp_path / name).exists(), name
    assert "report.json" in report.artifacts
    assert "PASS" in (tmp_path / "summary.txt").read_text()


def test_reports_are_reproducible(tmp_path):
    config = _rates_config()
    ExperimentService().run(config, output_dir=str(tmp_path / "a"), jobs=1)
    ExperimentService().run(config, output_dir=str(tmp_path / "b"), jobs=1)
    assert (tmp_path / "a" / "report.json").read_bytes() == (tmp_path / "b" / "report.json").read_bytes()
    assert (tmp_path / "a" / "M_inf.csv").read_bytes() == (tmp_path / "b" / "M_inf.csv").read_bytes()


def test_forward_stage_is_cached(tmp_path):
    cache = ComputationCache()
    service = ExperimentService(cache=cache)
    config = _rates_config()
    service.run(config, output_dir=str(tmp_path / "first"), jobs=1)
    service.run(config, output_dir=str(tmp_path / "second"), jobs=1)
    assert cache.misses == 1 and cache.hits == 1
    assert service.monitor.get_cache_hit_rate() == pytest.approx(50.0)
    assert (tmp_path / "second" / "M_inf.csv").exists()


def test_pair_estimates_run_on_chafee_infante(tmp_path):
    config = ExperimentConfig(
        kind="lemma31", preset="ci-16-2", seed=3,
        numerics=dict(h=1e-3, pair_count=4, pair_radius=0.3, t1=0.5),
    )
    report = ExperimentService().run(config, output_dir=str(tmp_path), jobs=1)
    names = {c.name for c in report.checks}
    assert "flow_lipschitz" in names
    assert report.passed


@pytest.mark.slow
def test_phi_run_on_constant_forcing(tmp_path):
    config = ExperimentConfig(
        kind="phi", preset="constant_forcing", seed=0,
        numerics=dict(h=1e-3, phi_grid_resolution=5, phi_n_max=4, n_starts=2, phi_samples=2),
    )
    report = ExperimentService().run(config, output_dir=str(tmp_path), jobs=1)
    checks = {c.name: c for c in report.checks}
    assert checks["constant_forcing_oracle"].passed
    assert checks["backward_bounds"].passed
    assert (tmp_path / "graph_Phi.csv").exists()
    assert (tmp_path / "backward_trajectory_0.csv").exists()
    reloaded = ArtifactRepository(tmp_path).load_trajectory("backward_trajectory_0")
    assert reloaded.times[-1] == pytest.approx(0.0)
