from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional
import logging

from app.core.config import settings
from app.models import CheckResult, ExperimentConfig, ExperimentKind, ExperimentReport
from app.numerics.estimates import rate_constants
from app.numerics.problem import SpectralProblem
from app.repositories.artifact_repository import ArtifactRepository
from app.repositories.preset_repository import ExperimentConfigRepository
from app.services.analysis_service import AnalysisService
from app.services.backward_service import BackwardResult, BackwardService
from app.services.estimates_service import EstimatesService
from app.services.forward_service import ForwardResult, ForwardService
from app.services.preset_service import PresetService
from app.infrastructure.cache import ComputationCache
from app.infrastructure.performance_monitor import PerformanceMonitor

logger = logging.getLogger(__name__)

_NEEDS_FORWARD = {ExperimentKind.RATES, ExperimentKind.INCLUSION, ExperimentKind.ALL}
_NEEDS_BACKWARD = {ExperimentKind.PHI, ExperimentKind.INCLUSION, ExperimentKind.ATTRACTOR, ExperimentKind.ALL}


class ExperimentService:
    """Runs one experiment config end to end and writes its artifacts"""

    def __init__(self, repository: ExperimentConfigRepository = None, preset_service: PresetService = None,
                 cache: ComputationCache = None, monitor: PerformanceMonitor = None):
        self.repository = repository or ExperimentConfigRepository()
        self.preset_service = preset_service or PresetService()
        self.cache = cache or ComputationCache()
        self.monitor = monitor or PerformanceMonitor()

    def load_config(self, path: str) -> ExperimentConfig:
        return self.repository.load(path)

    def _cached(self, stage: str, fingerprint: str, params: Dict[str, Any], compute):
        before = self.cache.hits
        result = self.cache.get_or_compute(stage, fingerprint, params, compute)
        self.monitor.record_cache(self.cache.hits > before)
        return result

    def _forward(self, problem: SpectralProblem, fingerprint: str, config: ExperimentConfig,
                 artifacts: ArtifactRepository, jobs: int) -> ForwardResult:
        def compute():
            with self.monitor.track_stage("forward", n_points=config.numerics.grid_resolution ** problem.p_dim):
                return ForwardService(repository=None, jobs=jobs).run(problem, fingerprint, config.numerics)

        result = self._cached("forward", fingerprint, config.numerics.model_dump(mode="json"), compute)
        ForwardService(repository=artifacts).save(result)
        return result

    def _backward(self, problem: SpectralProblem, fingerprint: str, config: ExperimentConfig,
                  artifacts: ArtifactRepository, jobs: int) -> BackwardResult:
        def compute():
            with self.monitor.track_stage("backward", n_points=config.numerics.phi_grid_resolution ** problem.p_dim):
                return BackwardService(repository=None, jobs=jobs).run(
                    problem, fingerprint, config.numerics, config.seed)

        params = {**config.numerics.model_dump(mode="json"), "seed": config.seed}
        result = self._cached("backward", fingerprint, params, compute)
        BackwardService(repository=artifacts).save(result)
        return result

    def run(self, config: ExperimentConfig, output_dir: Optional[str] = None,
            jobs: Optional[int] = None) -> ExperimentReport:
        jobs = jobs or settings.default_jobs
        out = Path(output_dir or config.output_dir)
        artifacts = ArtifactRepository(out)
        kind = config.kind
        started = datetime.now(timezone.utc)
        logger.info("Experiment started", extra={"experiment": kind.value, "preset": config.preset, "jobs": jobs})

        try:
            problem, fingerprint = self.preset_service.load_problem(config.preset, config.overrides)
            constants = rate_constants(problem)
            checks: List[CheckResult] = []
            sections: Dict[str, Any] = {"flags": list(problem.flags), "r_trunc": problem.r_trunc}

            forward = self._forward(problem, fingerprint, config, artifacts, jobs) \
                if kind in _NEEDS_FORWARD else None
            backward = self._backward(problem, fingerprint, config, artifacts, jobs) \
                if kind in _NEEDS_BACKWARD else None

            if forward is not None and kind in (ExperimentKind.RATES, ExperimentKind.ALL):
                checks.extend(forward.checks)
                sections["rates"] = forward.report.model_dump(mode="json")
                sections["lipschitz"] = [r.model_dump(mode="json") for r in forward.lipschitz]
            if backward is not None and kind in (ExperimentKind.PHI, ExperimentKind.ALL):
                checks.extend(backward.checks)
                sections["phi"] = {
                    "n_rows": backward.graph.n_points,
                    "multi_valued_nodes": sum(v.multi_valued for v in backward.values),
                    "half_power_ratios": [b.half_power_ratio for b in backward.bounds],
                }

            analysis = AnalysisService(repository=artifacts)
            if kind in (ExperimentKind.INCLUSION, ExperimentKind.ALL):
                with self.monitor.track_stage("inclusion", n_points=backward.graph.n_points):
                    checks.extend(analysis.inclusion(problem, forward.limit, backward.graph,
                                                     config.numerics, config.seed))
            if kind in (ExperimentKind.ATTRACTOR, ExperimentKind.ALL):
                with self.monitor.track_stage("attractor", n_points=config.numerics.attractor_seeds):
                    checks.extend(analysis.attractor(problem, backward.graph, config.numerics, config.seed))
            sections.update(analysis.sections)

            if kind in (ExperimentKind.LEMMA31, ExperimentKind.ALL):
                estimates = EstimatesService(repository=artifacts)
                with self.monitor.track_stage("pair_estimates", n_points=config.numerics.pair_count):
                    checks.extend(estimates.run(problem, config.numerics, config.seed))
                sections.update(estimates.sections)
        except Exception as e:
            logger.error(f"Experiment failed: {e}", extra={
                "experiment": kind.value,
                "preset": config.preset,
                "error": str(e),
                "error_type": type(e).__name__,
            })
            raise

        passed = all(c.passed for c in checks if c.required)
        report = ExperimentReport(
            experiment=kind,
            preset=config.preset,
            problem_hash=fingerprint,
            config=config,
            constants=constants,
            checks=checks,
            passed=passed,
            sections=sections,
        )
        return self._persist(report, artifacts, started, jobs)

    def _persist(self, report: ExperimentReport, artifacts: ArtifactRepository, started: datetime,
                 jobs: int) -> ExperimentReport:
        own = ["metadata.json", "report.json", "summary.txt"]
        names = sorted(set(artifacts.list_artifacts()) | set(own))
        report = report.model_copy(update={"artifacts": names})

        artifacts.save_json("report.json", report.model_dump(mode="json"))
        artifacts.save_text("summary.txt", self.summary(report))
        finished = datetime.now(timezone.utc)
        artifacts.save_json("metadata.json", {
            "app_version": settings.version,
            "started": started.isoformat(),
            "finished": finished.isoformat(),
            "jobs": jobs,
            "problem_hash": report.problem_hash,
            "performance": self.monitor.get_performance_summary(),
        })
        logger.info("Experiment finished", extra={
            "experiment": report.experiment.value,
            "preset": report.preset,
            "passed": report.passed,
            "duration": (finished - started).total_seconds(),
        })
        return report

    @staticmethod
    def summary(report: ExperimentReport) -> str:
        lines = [
            f"experiment {report.experiment.value} preset {report.preset} ({report.problem_hash})",
            f"result     {'PASS' if report.passed else 'FAIL'}",
            "",
        ]
        for check in report.checks:
            status = "ok  " if check.passed else ("FAIL" if check.required else "warn")
            value = "" if check.value is None else f" value={check.value:.6g}"
            threshold = "" if check.threshold is None else f" threshold={check.threshold:.6g}"
            lines.append(f"[{status}] {check.name}{value}{threshold}")
        return "\n".join(lines)
